//! Run reports, gates, CSV tables and the error object.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA: &str = "cc-lab.report/1";

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<String>,
}

impl CliError {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
            suggestion: None,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new("io", format!("{}: {e}", path.display()))
    }

    pub fn unknown(name: &str, candidates: &[&str]) -> Self {
        Self {
            kind: "unknown_id".into(),
            message: format!("unknown identifier '{name}'"),
            suggestion: cclab::counterexamples::closest(name, candidates.iter().copied()),
        }
    }
}

impl From<cclab::Error> for CliError {
    fn from(e: cclab::Error) -> Self {
        use cclab::Error as E;
        let kind = match &e {
            E::Dimension(_) => "dimension",
            E::InvalidInput(_) => "invalid_input",
            E::ZeroFrequency => "zero_frequency",
            E::NonConstantRank { .. } => "non_constant_rank",
            E::NonFiniteMultiplier(_) => "non_finite_multiplier",
            E::TermOverflow { .. } => "term_overflow",
            E::NonZeroMean(_) => "nonzero_mean",
            E::NonConvex(_) => "non_convex",
            E::TrivialTruncation => "trivial_truncation",
            E::TailBound(_) => "tail_bound",
            E::NotApplicable(_) => "not_applicable",
            E::Unknown { .. } => "unknown_id",
            E::Parse(_) => "parse",
            E::Io(_) => "io",
            E::Json(_) => "json",
        };
        let suggestion = match &e {
            E::Unknown { suggestion, .. } => suggestion.clone(),
            _ => None,
        };
        Self {
            kind: kind.into(),
            message: e.to_string(),
            suggestion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GateStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct Gate {
    pub name: String,
    pub status: GateStatus,
    pub detail: String,
}

impl Gate {
    pub fn check(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: if ok { GateStatus::Pass } else { GateStatus::Fail },
            detail: detail.into(),
        }
    }

    pub fn with_status(name: &str, status: GateStatus, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status,
            detail: detail.into(),
        }
    }
}

/// Column header plus the origin of its values.
#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    /// One of `input`, `measured`, `exact`, `expected`, `derived`.
    pub source: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    #[serde(skip)]
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, cols: &[(&str, &'static str)]) -> Self {
        Self {
            name: name.into(),
            columns: cols
                .iter()
                .map(|(n, s)| Column {
                    name: (*n).into(),
                    source: s,
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV with `#` metadata lines, then the header and body.
    pub fn to_csv(&self, experiment: &str, seed: u64, params_hash: &str) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        let mut meta = format!(
            "# table: {}\n# experiment: {experiment}\n# seed: {seed}\n# params-sha256: {params_hash}\n",
            self.name
        );
        for c in &self.columns {
            meta.push_str(&format!("# column {}: {}\n", c.name, c.source));
        }
        out.extend_from_slice(meta.as_bytes());
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .map_err(|e| CliError::new("io", e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::new("io", e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::new("io", e.to_string()))?;
        drop(w);
        Ok(out)
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// What a runner hands back.
pub struct Outcome {
    pub result: Value,
    pub gates: Vec<Gate>,
    pub tables: Vec<Table>,
    /// Extra input files: label → path.
    pub inputs: Vec<(String, PathBuf)>,
}

impl Outcome {
    pub fn new(result: impl Serialize) -> Self {
        Self {
            result: serde_json::to_value(result).expect("reports serialize"),
            gates: Vec::new(),
            tables: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn status(&self) -> GateStatus {
        if self.gates.iter().any(|g| g.status == GateStatus::Fail) {
            GateStatus::Fail
        } else if self.gates.iter().any(|g| g.status == GateStatus::Inconclusive) {
            GateStatus::Inconclusive
        } else {
            GateStatus::Pass
        }
    }
}

pub fn exit_code(status: GateStatus) -> i32 {
    match status {
        GateStatus::Pass => 0,
        GateStatus::Fail => 1,
        GateStatus::Inconclusive => 2,
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub experiment: String,
    pub status: GateStatus,
    pub exit_code: i32,
    pub seed: u64,
    pub library_version: &'static str,
    pub cli_version: &'static str,
    pub config: Value,
    pub config_file: Option<String>,
    pub input_hashes: BTreeMap<String, String>,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub gates: Vec<Gate>,
    pub tables: Vec<TableRef>,
    pub result: Value,
}

#[derive(Debug, Serialize)]
pub struct TableRef {
    pub name: String,
    pub path: Option<String>,
    pub columns: Vec<Column>,
}

/// Output file layout: a `.csv` target receives the first table and the
/// report goes next to it as `.json`; any other target receives the report
/// and tables go next to it as `<stem>.<table>.csv`.
pub struct Layout {
    pub report: Option<PathBuf>,
    pub tables: Vec<Option<PathBuf>>,
}

pub fn layout(out: Option<&Path>, tables: &[Table]) -> Layout {
    let Some(out) = out else {
        return Layout {
            report: None,
            tables: vec![None; tables.len()],
        };
    };
    let stem = out.with_extension("");
    let sibling = |t: &Table| PathBuf::from(format!("{}.{}.csv", stem.display(), t.name));
    if out.extension().is_some_and(|e| e == "csv") {
        Layout {
            report: Some(out.with_extension("json")),
            tables: tables
                .iter()
                .enumerate()
                .map(|(i, t)| Some(if i == 0 { out.to_path_buf() } else { sibling(t) }))
                .collect(),
        }
    } else {
        Layout {
            report: Some(out.to_path_buf()),
            tables: tables.iter().map(|t| Some(sibling(t))).collect(),
        }
    }
}
