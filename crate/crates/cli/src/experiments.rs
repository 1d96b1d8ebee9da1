//! Subcommand parameter groups and their runners.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use cclab::counterexamples::{
    bounded_verdict, pairing_verdict, run_case, table1_row, CaseId, CaseReport, Ex61, Ex62, Ex63, Representation,
    SequenceSpec, Verdict, VerdictCriteria, SCENARIOS,
};
use cclab::counterexamples::AppendixOrlicz;
use cclab::decompose::helmholtz;
use cclab::extension::{identity_refinement, pairing_identity, random_identity_case, theorem_d_ensemble, ThmDConfig};
use cclab::field::{GridField, TrigPoly};
use cclab::norms::{local_hardy_norm, MaximalConfig};
use cclab::quasiaffine::{pairing_experiment, OscillationFamily, PairingFamily, TestFunction};
use cclab::rng::keyed_rng;
use cclab::symbol::{self, constant_rank_check, OperatorSymbol, SamplingPlan};
use cclab::truncate::{data_sup, lipschitz_truncate, random_spikes, DEFAULT_DERIV_CONSTANT};

use crate::registry::OPERATORS;
use crate::report::{num, CliError, Gate, GateStatus, Outcome, Table};

// ---------------------------------------------------------------------------
// Parsing helpers

/// `a:b` doubles from `a` up to `b`; `a..b` steps by one; otherwise a comma list.
pub fn parse_indices(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::new("parse", format!("bad index list '{s}'"));
    let int = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        (int(a)?..=int(b)?).collect()
    } else if let Some((a, b)) = s.split_once(':') {
        let (mut a, b) = (int(a)?, int(b)?);
        if a == 0 {
            return Err(bad());
        }
        let mut v = Vec::new();
        while a <= b {
            v.push(a);
            a *= 2;
        }
        v
    } else {
        s.split(',').map(int).collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn parse_floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::new("parse", format!("bad number list '{s}'"))))
        .collect()
}

pub fn parse_test(s: &str) -> Result<TestFunction, CliError> {
    if s.trim_start().starts_with('{') {
        return serde_json::from_str(s).map_err(|e| CliError::new("parse", format!("test function: {e}")));
    }
    let (kind, args) = s.split_once(':').unwrap_or((s, ""));
    let v = if args.is_empty() { Vec::new() } else { parse_floats(args)? };
    let want = |k: usize| {
        if v.len() == k {
            Ok(())
        } else {
            Err(CliError::new("parse", format!("test function '{kind}' takes {k} numbers, got {}", v.len())))
        }
    };
    Ok(match kind {
        "bump" => {
            want(3)?;
            TestFunction::SmoothBump {
                center: v[..2].to_vec(),
                radius: v[2],
            }
        }
        "box" => {
            want(4)?;
            TestFunction::IndicatorBox {
                lo: v[..2].to_vec(),
                hi: v[2..].to_vec(),
            }
        }
        "ball" => {
            want(3)?;
            TestFunction::IndicatorBall {
                center: v[..2].to_vec(),
                radius: v[2],
            }
        }
        "cusp" => {
            want(4)?;
            TestFunction::HolderCusp {
                center: v[..2].to_vec(),
                radius: v[2],
                alpha: v[3],
            }
        }
        "const" => {
            want(1)?;
            TestFunction::Constant { value: v[0] }
        }
        other => return Err(CliError::unknown(other, &["bump", "box", "ball", "cusp", "const"])),
    })
}

fn operator(name: &str) -> Result<OperatorSymbol, CliError> {
    symbol::builtin(name).map_err(|e| match e {
        cclab::Error::Unknown { name, .. } => {
            let ids: Vec<&str> = OPERATORS.iter().map(|o| o.0).collect();
            CliError::unknown(&name, &ids)
        }
        other => other.into(),
    })
}

fn verdict_gate(name: &str, v: Verdict, detail: String) -> Gate {
    let status = if v == Verdict::Inconclusive {
        GateStatus::Inconclusive
    } else {
        GateStatus::Pass
    };
    Gate::with_status(name, status, format!("{} ({detail})", v.symbol()))
}

fn spread(v: &[f64]) -> f64 {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mn = v.iter().cloned().fold(f64::INFINITY, f64::min);
    mx / mn
}

// ---------------------------------------------------------------------------
// check-rank

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRankParams {
    /// Built-in operator, e.g. `div2` or `grad:n=3`.
    #[arg(long, default_value = "div2")]
    pub op: String,
    /// Operator symbol as JSON; overrides `--op`.
    #[arg(long)]
    pub operator_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

pub fn check_rank(p: &CheckRankParams, _seed: u64) -> Result<Outcome, CliError> {
    let mut inputs = Vec::new();
    let sym = match &p.operator_file {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
            let v: serde_json::Value =
                serde_json::from_slice(&bytes).map_err(|e| CliError::new("parse", format!("operator file: {e}")))?;
            inputs.push(("operator_file".to_string(), path.clone()));
            OperatorSymbol::from_json(&v)?
        }
        None => operator(&p.op)?,
    };
    let plan = SamplingPlan {
        count: p.samples,
        include_axes: true,
    };
    let r = constant_rank_check(&sym, plan, p.tol);
    let detail = match (r.rank, &r.witness) {
        (Some(k), _) => format!("rank {k} on {} samples", r.samples),
        (None, Some(w)) => format!("rank changes at {w:?}"),
        _ => String::new(),
    };
    let mut o = Outcome::new(json!({
        "operator": sym.to_json(),
        "rank": r,
        "kernel_dimension": r.rank.map(|k| sym.dim_v - k),
    }));
    o.gates.push(Gate::check("constant rank", r.constant, detail));
    o.inputs = inputs;
    Ok(o)
}

// ---------------------------------------------------------------------------
// decompose

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeParams {
    #[arg(long, default_value = "divcurl2")]
    pub op: String,
    /// Grid points per axis.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Number of random fields.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Frequency band `[−B, B]ⁿ`.
    #[arg(long, default_value_t = 6)]
    pub band: i64,
}

pub fn decompose(p: &DecomposeParams, seed: u64) -> Result<Outcome, CliError> {
    let sym = operator(&p.op)?;
    if 2 * p.band as usize >= p.grid {
        return Err(CliError::new("invalid_input", "band must be below the grid Nyquist frequency"));
    }
    let mut t = Table::new(
        "residuals",
        &[
            ("index", "input"),
            ("reconstruction", "measured"),
            ("constraint", "measured"),
            ("orthogonality", "measured"),
            ("idempotence", "measured"),
        ],
    );
    let mut rows = Vec::new();
    for i in 0..p.count {
        let mut rng = keyed_rng(seed, "decompose", i as u64);
        let v = TrigPoly::random_bandlimited(sym.n, sym.dim_v, p.band, &mut rng).render(&vec![p.grid; sym.n])?;
        let r = helmholtz(&v, &sym)?.residuals;
        t.push(vec![
            i.to_string(),
            num(r.reconstruction),
            num(r.constraint),
            num(r.orthogonality),
            num(r.idempotence),
        ]);
        rows.push(r);
    }
    let worst = |f: fn(&cclab::decompose::Residuals) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let (rec, con, orth, idem) = (
        worst(|r| r.reconstruction),
        worst(|r| r.constraint),
        worst(|r| r.orthogonality),
        worst(|r| r.idempotence),
    );
    let mut o = Outcome::new(json!({ "operator": p.op, "residuals": rows }));
    o.gates.push(Gate::check("reconstruction ≤ 1e-10", rec <= 1e-10, format!("{rec:.2e}")));
    o.gates.push(Gate::check("constraint ≤ 1e-10", con <= 1e-10, format!("{con:.2e}")));
    o.gates.push(Gate::check("orthogonality ≤ 1e-9", orth <= 1e-9, format!("{orth:.2e}")));
    o.gates.push(Gate::check("idempotence ≤ 1e-9", idem <= 1e-9, format!("{idem:.2e}")));
    o.tables.push(t);
    Ok(o)
}

// ---------------------------------------------------------------------------
// pairing

pub const PAIRING_SEQUENCES: &[&str] = &["ex61", "ex62", "ex63", "oscillation"];

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairingParams {
    /// One of ex61, ex62, ex63, oscillation.
    #[arg(long, default_value = "ex61")]
    pub seq: String,
    /// Test function (repeatable), e.g. `box:0,0,1,1`; defaults per sequence.
    #[arg(long = "test")]
    #[serde(default)]
    pub tests: Vec<String>,
    /// Indices: `a:b` (doubling), `a..b` or a comma list.
    #[arg(long, default_value = "2:64")]
    pub j: String,
    /// Grid points per axis for grid-based sequences.
    #[arg(long)]
    pub grid: Option<usize>,
}

fn pairing_family(seq: &str, grid: Option<usize>) -> Result<(Box<dyn PairingFamily>, &'static str), CliError> {
    Ok(match seq {
        "ex61" => {
            let mut e = Ex61::default();
            if let Some(g) = grid {
                e.grid = g;
            }
            (Box::new(e), "box:0,0,1,1")
        }
        "ex62" => (Box::new(Ex62::default()), "bump:0,0,1.5"),
        "ex63" => (Box::new(Ex63::default()), "bump:0.5,0,1"),
        "oscillation" => (Box::new(OscillationFamily { grid }), "bump:2,2.5,1"),
        other => return Err(CliError::unknown(other, PAIRING_SEQUENCES)),
    })
}

pub fn pairing(p: &PairingParams, _seed: u64) -> Result<Outcome, CliError> {
    let (fam, default_test) = pairing_family(&p.seq, p.grid)?;
    let js = parse_indices(&p.j)?;
    let specs: Vec<String> = if p.tests.is_empty() {
        vec![default_test.to_string()]
    } else {
        p.tests.clone()
    };
    let criteria = VerdictCriteria::default();
    let mut t = Table::new(
        "pairings",
        &[
            ("test", "input"),
            ("index", "input"),
            ("pairing", "measured"),
            ("abs_pairing", "measured"),
            ("limit", "exact"),
        ],
    );
    let mut reports = Vec::new();
    let mut gates = Vec::new();
    for s in &specs {
        let test = parse_test(s)?;
        let r = pairing_experiment(fam.as_ref(), &test, &js)?;
        let scale = r.abs_pairings.iter().cloned().fold(0.0, f64::max);
        let v = pairing_verdict(&r.pairings, r.limit, scale, &criteria);
        for (k, j) in js.iter().enumerate() {
            t.push(vec![
                r.test.clone(),
                j.to_string(),
                num(r.pairings[k]),
                num(r.abs_pairings[k]),
                num(r.limit),
            ]);
        }
        gates.push(verdict_gate(
            &format!("verdict for {}", r.test),
            v.verdict,
            format!("variation {:.3}, deviation {:.3}", v.variation, v.deviation),
        ));
        reports.push(json!({ "report": r, "verdict": v }));
    }
    let mut o = Outcome::new(json!({ "sequence": fam.name(), "tests": reports }));
    o.gates = gates;
    o.tables.push(t);
    Ok(o)
}

// ---------------------------------------------------------------------------
// counterexample

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleParams {
    /// Sequence id, e.g. jac_case3.
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// torus or grid.
    #[arg(long, default_value = "torus")]
    pub mode: String,
    #[arg(long)]
    pub grid: Option<usize>,
    /// Indices: `a:b` (doubling), `a..b` or a comma list; defaults per case.
    #[arg(long)]
    pub k: Option<String>,
    /// Test function for the div-curl cases (repeatable).
    #[arg(long = "test")]
    #[serde(default)]
    pub tests: Vec<String>,
}

fn default_indices(case: CaseId) -> &'static str {
    match case {
        CaseId::Ex61 => "2:64",
        CaseId::Ex62 => "4:32",
        CaseId::Ex63 => "1..4",
        CaseId::JacCase1 => "4:64",
        CaseId::JacCase2 => "8:128",
        CaseId::JacCase3 => "4:32",
        CaseId::AppendixOrlicz => "1",
    }
}

pub fn counterexample(p: &CounterexampleParams, _seed: u64) -> Result<Outcome, CliError> {
    let case: CaseId = p
        .case
        .as_deref()
        .ok_or_else(|| CliError::new("usage", "missing --case"))?
        .parse()?;
    let spec = SequenceSpec {
        n: p.n,
        alpha: p.alpha,
        beta: p.beta,
        beta1: p.beta1,
        r: p.r,
        p: p.p,
        gamma: p.gamma,
        mode: p.mode.parse::<Representation>()?,
        grid: p.grid,
        ..SequenceSpec::new(case)
    };
    let ks = parse_indices(p.k.as_deref().unwrap_or(default_indices(case)))?;
    let tests = p.tests.iter().map(|s| parse_test(s)).collect::<Result<Vec<_>, _>>()?;
    let report = run_case(&spec, &ks, if tests.is_empty() { None } else { Some(&tests) })?;
    let mut gates = Vec::new();
    let mut tables = Vec::new();
    match &report {
        CaseReport::DivCurl(r) => {
            let mut t = Table::new(
                "pairings",
                &[("test", "input"), ("index", "input"), ("pairing", "measured"), ("limit", "exact")],
            );
            let c = VerdictCriteria::default();
            for tr in &r.tests {
                for (j, v) in tr.indices.iter().zip(&tr.pairings) {
                    t.push(vec![tr.test.clone(), j.to_string(), num(*v), num(tr.limit)]);
                }
                let scale = tr.abs_pairings.iter().cloned().fold(0.0, f64::max);
                let v = pairing_verdict(&tr.pairings, tr.limit, scale, &c);
                gates.push(verdict_gate(&format!("verdict for {}", tr.test), v.verdict, format!("{:.3}", v.variation)));
            }
            tables.push(t);
        }
        CaseReport::Ex63(r) => {
            let mut t = Table::new("masses", &[("cap", "input"), ("truncated_llogl", "measured")]);
            for (c, m) in r.caps.iter().zip(&r.truncated_masses) {
                t.push(vec![num(*c), num(*m)]);
            }
            tables.push(t);
            let inc = r.truncated_masses.windows(2).all(|w| w[1] > w[0]);
            gates.push(Gate::check("truncated masses strictly increase", inc, ""));
            gates.push(Gate::check(
                "hypotheses",
                r.hypotheses.outside_l2log2 && r.hypotheses.inside_l1,
                format!("{:?}", r.hypotheses),
            ));
        }
        CaseReport::Case1(r) => {
            tables.push(rate_table(&r.rate));
            gates.push(Gate::check("moment a₁ > 0", r.moments.a1 > 0.0, format!("{:.4e}", r.moments.a1)));
            push_rate_gates(&mut gates, &r.rate);
        }
        CaseReport::Rate(r) => {
            tables.push(rate_table(r));
            push_rate_gates(&mut gates, r);
        }
        CaseReport::Case3(r) => {
            let mut t = rate_table(&r.rate);
            t.columns.push(crate::report::Column {
                name: "pairing_over_log_k".into(),
                source: "derived",
            });
            for (row, lr) in t.rows.iter_mut().zip(&r.log_ratios) {
                row.push(num(*lr));
            }
            tables.push(t);
            push_rate_gates(&mut gates, &r.rate);
            let gaps = r.gaps.iter().all(|g| g.gap_ok && g.ratio_ok);
            gates.push(Gate::check("frequency gaps", gaps, ""));
            let n = p.n.unwrap_or(2) as i32;
            let pin = PI.powi(n);
            let band = r
                .rate
                .indices
                .iter()
                .zip(&r.log_ratios)
                .filter(|(k, _)| **k >= 8)
                .all(|(_, lr)| *lr >= 0.5 * pin && *lr <= 2.0 * pin);
            gates.push(Gate::check("pairing / ln k within [πⁿ/2, 2πⁿ] for k ≥ 8", band, ""));
        }
        CaseReport::Orlicz(r) => {
            tables.push(orlicz_table(r));
            push_orlicz_gates(&mut gates, r);
        }
    }
    let mut o = Outcome::new(json!({ "spec": spec, "indices": ks, "report": report }));
    o.gates = gates;
    o.tables = tables;
    Ok(o)
}

fn rate_table(r: &cclab::counterexamples::RateReport) -> Table {
    let mut t = Table::new(
        "rate",
        &[("index", "input"), ("pairing", "measured"), ("closed_form", "exact")],
    );
    for (i, (k, v)) in r.indices.iter().zip(&r.pairings).enumerate() {
        let c = r.closed_form.as_ref().map(|c| num(c[i])).unwrap_or_default();
        t.push(vec![k.to_string(), num(*v), c]);
    }
    t
}

fn push_rate_gates(gates: &mut Vec<Gate>, r: &cclab::counterexamples::RateReport) {
    if let Some(e) = r.closed_form_error {
        gates.push(Gate::check("closed form ≤ 1e-12", e <= 1e-12, format!("{e:.2e}")));
    }
    if r.predicted_exponent != 0.0 {
        if let (Some(e), Some(f)) = (r.exponent_error, &r.fit) {
            gates.push(Gate::check(
                "fitted exponent within 15%",
                e <= 0.15,
                format!("{:.4} vs {:.4}", f.exponent, r.predicted_exponent),
            ));
        }
    }
}

// ---------------------------------------------------------------------------
// table1

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Params {
    #[arg(long, default_value_t = 0.05)]
    pub converge_tol: f64,
    #[arg(long, default_value_t = 0.5)]
    pub fail_tol: f64,
    #[arg(long, default_value_t = 1.5)]
    pub escape_ratio: f64,
    #[arg(long, default_value_t = 2.0)]
    pub bounded_factor: f64,
    /// Run one scenario only (i, ii, iii, iv).
    #[arg(long)]
    pub scenario: Option<String>,
}

pub fn table1(p: &Table1Params, _seed: u64) -> Result<Outcome, CliError> {
    let c = VerdictCriteria {
        converge_tol: p.converge_tol,
        fail_tol: p.fail_tol,
        escape_ratio: p.escape_ratio,
        bounded_factor: p.bounded_factor,
    };
    if !(0.0 < c.converge_tol && c.converge_tol < c.fail_tol) {
        return Err(CliError::new("invalid_input", "need 0 < converge_tol < fail_tol"));
    }
    let scenarios: Vec<&str> = match &p.scenario {
        Some(s) => vec![s.trim_matches(|ch| ch == '(' || ch == ')')],
        None => SCENARIOS.to_vec(),
    };
    let rows = scenarios
        .iter()
        .map(|s| table1_row(s, &c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(
        "table1",
        &[
            ("scenario", "input"),
            ("description", "input"),
            ("measure", "measured"),
            ("l1", "measured"),
            ("hardy", "measured"),
            ("expected", "expected"),
            ("matches", "derived"),
        ],
    );
    let mut gates = Vec::new();
    for r in &rows {
        let [m, l, h] = r.verdicts();
        let exp: Vec<&str> = r.expected.iter().map(|v| v.symbol()).collect();
        t.push(vec![
            r.scenario.clone(),
            r.description.clone(),
            m.symbol().into(),
            l.symbol().into(),
            h.symbol().into(),
            exp.join("/"),
            r.matches_expected.to_string(),
        ]);
        let status = if r.verdicts().contains(&Verdict::Inconclusive) {
            GateStatus::Inconclusive
        } else if r.matches_expected {
            GateStatus::Pass
        } else {
            GateStatus::Fail
        };
        gates.push(Gate::with_status(
            &format!("scenario {}", r.scenario),
            status,
            format!("{}/{}/{}", m.symbol(), l.symbol(), h.symbol()),
        ));
    }
    let mut o = Outcome::new(json!({ "criteria": c, "rows": rows }));
    o.gates = gates;
    o.tables.push(t);
    Ok(o)
}

// ---------------------------------------------------------------------------
// truncate

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncateParams {
    /// Dimension of the spike ensemble (1 or 2).
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Ensemble size.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// λ as fractions of the largest derivative sum.
    #[arg(long, default_value = "0.3,0.1,0.03,0.01,0.003")]
    pub fractions: String,
    /// Field dump to truncate instead of the ensemble.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Largest allowed max/min of the ensemble-max volume ratio across λ.
    #[arg(long, default_value_t = 8.0)]
    pub max_spread: f64,
}

pub fn truncate(p: &TruncateParams, seed: u64) -> Result<Outcome, CliError> {
    let fractions = parse_floats(&p.fractions)?;
    let mut inputs = Vec::new();
    let fields: Vec<GridField> = match &p.input {
        Some(path) => {
            inputs.push(("input".to_string(), path.clone()));
            vec![GridField::read_dump(path)?]
        }
        None => (0..p.count as u64)
            .map(|i| random_spikes(seed, i, p.n))
            .collect::<Result<_, _>>()?,
    };
    let mut t = Table::new(
        "truncation",
        &[
            ("case", "input"),
            ("fraction", "input"),
            ("lambda", "derived"),
            ("bad_measure", "measured"),
            ("deriv_bound", "measured"),
            ("volume_constant", "measured"),
        ],
    );
    let mut maxima = vec![0.0f64; fractions.len()];
    let mut invariants = true;
    let mut worst_deriv: f64 = 0.0;
    let mut results = Vec::new();
    for (i, v) in fields.iter().enumerate() {
        let fmax = data_sup(v, p.k)?;
        for (li, fr) in fractions.iter().enumerate() {
            let r = lipschitz_truncate(v, fmax * fr, p.k, p.p)?;
            invariants &= r.good_set_max_diff == 0.0 && r.chain_inclusion;
            worst_deriv = worst_deriv.max(r.measured_deriv_bound);
            maxima[li] = maxima[li].max(r.measured_volume_constant);
            t.push(vec![
                i.to_string(),
                num(*fr),
                num(r.lambda),
                num(r.bad_measure),
                num(r.measured_deriv_bound),
                num(r.measured_volume_constant),
            ]);
            results.push(r);
        }
    }
    let sp = spread(&maxima);
    let mut o = Outcome::new(json!({ "results": results, "volume_maxima": maxima, "volume_spread": sp }));
    o.gates.push(Gate::check("u = v off the bad set; difference supported near it", invariants, ""));
    o.gates.push(Gate::check(
        "derivative bound",
        worst_deriv <= DEFAULT_DERIV_CONSTANT,
        format!("{worst_deriv:.3} ≤ {DEFAULT_DERIV_CONSTANT}"),
    ));
    if fractions.len() > 1 {
        o.gates.push(Gate::check(
            "volume ratio stable across λ",
            sp.is_finite() && sp <= p.max_spread,
            format!("max/min {sp:.3}"),
        ));
    }
    o.tables.push(t);
    o.inputs = inputs;
    Ok(o)
}

// ---------------------------------------------------------------------------
// hardy

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardyParams {
    /// ex61 or ex62.
    #[arg(long, default_value = "ex62")]
    pub seq: String,
    #[arg(long, default_value = "4:32")]
    pub j: String,
    /// Scalar field dump; its local Hardy norm is reported instead.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Ball radius for `--input`.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Ball centre for `--input`, comma separated.
    #[arg(long)]
    pub center: Option<String>,
}

pub fn hardy(p: &HardyParams, _seed: u64) -> Result<Outcome, CliError> {
    if let Some(path) = &p.input {
        let f = GridField::read_dump(path)?;
        let center = match &p.center {
            Some(c) => parse_floats(c)?,
            None => vec![0.0; f.n()],
        };
        let v = local_hardy_norm(&f, p.r, &center, &MaximalConfig::default())?;
        let mut o = Outcome::new(json!({ "hardy_norm": v, "radius": p.r, "center": center }));
        o.inputs.push(("input".into(), path.clone()));
        o.gates.push(Gate::check("finite", v.is_finite(), num(v)));
        return Ok(o);
    }
    let js = parse_indices(&p.j)?;
    let values: Vec<f64> = match p.seq.as_str() {
        "ex61" => {
            let e = Ex61::default();
            js.iter().map(|j| e.hardy(*j)).collect::<Result<_, _>>()?
        }
        "ex62" => {
            let e = Ex62::default();
            js.iter().map(|j| e.hardy(*j)).collect::<Result<_, _>>()?
        }
        other => return Err(CliError::unknown(other, &["ex61", "ex62"])),
    };
    let b = bounded_verdict(&values, &VerdictCriteria::default());
    let mut t = Table::new("hardy", &[("index", "input"), ("hardy_norm", "measured")]);
    for (j, v) in js.iter().zip(&values) {
        t.push(vec![j.to_string(), num(*v)]);
    }
    let mut o = Outcome::new(json!({ "sequence": p.seq, "indices": js, "values": values, "bounded": b }));
    o.gates.push(Gate::check("finite", values.iter().all(|v| v.is_finite()), ""));
    o.tables.push(t);
    Ok(o)
}

// ---------------------------------------------------------------------------
// extension-identity

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityParams {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long = "tlevels", default_value_t = 64)]
    pub t_levels: usize,
    #[arg(long = "T", default_value_t = 8.0)]
    pub t_max: f64,
    /// Smallest height; defaults to an eighth of the grid spacing.
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub cases: usize,
    /// Also run the three-level refinement study on case 0.
    #[arg(long)]
    #[serde(default)]
    pub refine: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

pub fn extension_identity(p: &IdentityParams, seed: u64) -> Result<Outcome, CliError> {
    if p.n != 2 {
        return Err(cclab::Error::NotApplicable(format!("the identity experiment is planar; got n = {}", p.n)).into());
    }
    let mut t = Table::new(
        "identity",
        &[
            ("case", "input"),
            ("lhs", "measured"),
            ("rhs", "measured"),
            ("rel_error", "derived"),
        ],
    );
    let mut reports = Vec::new();
    for i in 0..p.cases as u64 {
        let (u, phi) = random_identity_case(seed, i, p.grid);
        let r = pairing_identity(&u, &phi, p.t_max, p.t_levels, p.t_min)?;
        t.push(vec![i.to_string(), num(r.lhs), num(r.rhs), num(r.rel_error)]);
        reports.push(r);
    }
    let worst = reports.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    let refinement = if p.refine {
        Some(identity_refinement(seed, 0, p.t_max)?)
    } else {
        None
    };
    let mut o = Outcome::new(json!({ "cases": reports, "refinement": refinement }));
    o.gates.push(Gate::check(
        &format!("relative error ≤ {:e}", p.tol),
        worst <= p.tol,
        format!("{worst:.2e}"),
    ));
    if let Some(r) = &refinement {
        o.gates.push(Gate::check("monotone under refinement", r.monotone, ""));
    }
    o.tables.push(t);
    Ok(o)
}

// ---------------------------------------------------------------------------
// thmD

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThmDParams {
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub s: f64,
    /// Random items added to the deterministic grid.
    #[arg(long, default_value_t = 0)]
    pub ensemble: usize,
    #[arg(long, default_value = "4,8,16,32,64")]
    pub frequencies: String,
    #[arg(long, default_value = "0.5,1,2")]
    pub scalings: String,
    /// Lebesgue exponent of the interpolation variant.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 16)]
    pub points_per_period: usize,
    #[arg(long, default_value_t = 4.0)]
    pub max_spread: f64,
}

pub fn thm_d(p: &ThmDParams, seed: u64) -> Result<Outcome, CliError> {
    let cfg = ThmDConfig {
        alpha: p.alpha,
        s: p.s,
        frequencies: parse_indices(&p.frequencies)?,
        scalings: parse_floats(&p.scalings)?,
        random_items: p.ensemble,
        seed,
        points_per_period: p.points_per_period,
        p: p.p,
    };
    let r = theorem_d_ensemble(&cfg)?;
    let mut t = Table::new(
        "ratios",
        &[
            ("m", "input"),
            ("scaling", "input"),
            ("pairing", "measured"),
            ("ratio", "derived"),
            ("interpolation_ratio", "derived"),
        ],
    );
    for it in &r.items {
        t.push(vec![
            it.m.to_string(),
            num(it.scaling),
            num(it.pairing.lhs),
            num(it.pairing.ratio),
            num(it.interpolation_ratio),
        ]);
    }
    let mut o = Outcome::new(&r);
    o.gates.push(Gate::check(
        "ratio max/min",
        r.ratio_spread <= p.max_spread,
        format!("{:.3}", r.ratio_spread),
    ));
    o.gates.push(Gate::check(
        "interpolation ratio max/min",
        r.interpolation_spread <= p.max_spread,
        format!("{:.3}", r.interpolation_spread),
    ));
    o.tables.push(t);
    Ok(o)
}

// ---------------------------------------------------------------------------
// orlicz

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrliczParams {
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
}

fn orlicz_table(r: &cclab::counterexamples::OrliczReport) -> Table {
    let mut t = Table::new("masses", &[("cap", "input"), ("truncated_mass", "measured")]);
    for (c, m) in r.caps.iter().zip(&r.truncated_masses) {
        t.push(vec![num(*c), num(*m)]);
    }
    t
}

fn push_orlicz_gates(gates: &mut Vec<Gate>, r: &cclab::counterexamples::OrliczReport) {
    gates.push(Gate::check(
        "partner inverts",
        r.inverse_residual <= 1e-10,
        format!("{:.2e}", r.inverse_residual),
    ));
    gates.push(Gate::check("dominance pattern", r.hypotheses.all_as_expected, ""));
    gates.push(Gate::check("truncated masses strictly increase", r.strictly_increasing, ""));
    gates.push(Gate::check(
        "ψ and product masses finite",
        r.psi_mass.is_finite() && r.product_mass.is_finite(),
        format!("{:.4} {:.4}", r.psi_mass, r.product_mass),
    ));
}

pub fn orlicz(p: &OrliczParams, _seed: u64) -> Result<Outcome, CliError> {
    let r = AppendixOrlicz {
        a: p.a,
        b: p.b,
        gamma: p.gamma,
    }
    .run()?;
    let mut o = Outcome::new(&r);
    push_orlicz_gates(&mut o.gates, &r);
    o.tables.push(orlicz_table(&r));
    Ok(o)
}
