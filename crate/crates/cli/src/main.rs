//! `cc-lab`: runs the cclab experiments and writes JSON reports and CSV tables.
//!
//! Exit codes: 0 when every gate passes, 2 when some gate is inconclusive,
//! 1 on a failed gate or any error. Errors are printed to stderr as
//! `{"error": {"kind", "message", "suggestion"}}`.

mod config;
mod experiments;
mod registry;
mod report;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, FromArgMatches, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use experiments::*;
use report::{exit_code, layout, sha256_hex, CliError, Outcome, RunReport, TableRef, SCHEMA};

#[derive(Parser)]
#[command(name = "cc-lab", version, about = "Compensated-compactness numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config; its values override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path (`.json`) or primary table path (`.csv`); stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random ensembles.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Constant-rank check of an operator symbol.
    CheckRank {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: CheckRankParams,
    },
    /// Helmholtz splitting residuals on random fields.
    Decompose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: DecomposeParams,
    },
    /// Pairings of F(v_j) against test functions.
    Pairing {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: PairingParams,
    },
    /// Runs a registered sharpness family.
    Counterexample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: CounterexampleParams,
    },
    /// Four-scenario verdict matrix.
    Table1 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: Table1Params,
    },
    /// Lipschitz truncation of a spike ensemble or a dumped field.
    Truncate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: TruncateParams,
    },
    /// Local Hardy norms along a sequence.
    Hardy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: HardyParams,
    },
    /// Half-space pairing identity on random cases.
    ExtensionIdentity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: IdentityParams,
    },
    /// Determinant pairing ratio over an oscillation ensemble.
    #[command(name = "thmD")]
    ThmD {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ThmDParams,
    },
    /// Orlicz pair with a non-integrable product.
    Orlicz {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: OrliczParams,
    },
    /// Runs the experiment named in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lists registered experiments, sequences, operators, integrands, norms and test functions.
    List,
    /// Describes one registered id.
    Describe { id: String },
}

type Runner<P> = fn(&P, u64) -> Result<Outcome, CliError>;

fn hash_file(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read(path).map(|b| sha256_hex(&b)).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn execute<P: Serialize + DeserializeOwned>(
    experiment: &str,
    flags: P,
    common: Common,
    run: Runner<P>,
) -> Result<i32, CliError> {
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let mut hashes = BTreeMap::new();
    let (params, seed, out) = match &common.config {
        Some(path) => {
            let c = config::load(path)?;
            if let Some(e) = &c.file.experiment {
                if e != experiment {
                    return Err(CliError::new(
                        "config",
                        format!("config is for experiment '{e}', not '{experiment}'"),
                    ));
                }
            }
            hashes.insert("config_file".to_string(), c.sha256.clone());
            let p = config::merge(&flags, &c.file.params)?;
            (p, c.file.seed.unwrap_or(common.seed), c.file.out.clone().or(common.out.clone()))
        }
        None => (flags, common.seed, common.out.clone()),
    };
    let params_json = serde_json::to_value(&params).map_err(|e| CliError::new("internal", e.to_string()))?;
    let params_hash = sha256_hex(
        serde_json::to_string(&json!({ "experiment": experiment, "seed": seed, "params": params_json }))
            .expect("values serialize")
            .as_bytes(),
    );
    hashes.insert("params".to_string(), params_hash.clone());

    let outcome = run(&params, seed)?;
    for (label, path) in &outcome.inputs {
        hashes.insert(label.clone(), hash_file(path)?);
    }
    let status = outcome.status();
    let lay = layout(out.as_deref(), &outcome.tables);
    let mut refs = Vec::new();
    for (t, path) in outcome.tables.iter().zip(&lay.tables) {
        if let Some(path) = path {
            write_file(path, &t.to_csv(experiment, seed, &params_hash)?)?;
        }
        refs.push(TableRef {
            name: t.name.clone(),
            path: path.as_ref().map(|p| p.display().to_string()),
            columns: t.columns.clone(),
        });
    }
    let rep = RunReport {
        schema: SCHEMA,
        experiment: experiment.into(),
        status,
        exit_code: exit_code(status),
        seed,
        library_version: cclab::VERSION,
        cli_version: env!("CARGO_PKG_VERSION"),
        config: params_json,
        config_file: common.config.as_ref().map(|p| p.display().to_string()),
        input_hashes: hashes,
        started_unix,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        gates: outcome.gates,
        tables: refs,
        result: outcome.result,
    };
    let text = serde_json::to_string_pretty(&rep).map_err(|e| CliError::new("internal", e.to_string()))?;
    match &lay.report {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            let failing: Vec<String> = rep
                .gates
                .iter()
                .filter(|g| g.status != report::GateStatus::Pass)
                .map(|g| format!("{} ({})", g.name, g.detail))
                .collect();
            println!(
                "{experiment}: {:?} -> {}{}",
                status,
                path.display(),
                if failing.is_empty() {
                    String::new()
                } else {
                    format!("; not passing: {}", failing.join("; "))
                }
            );
        }
        None => println!("{text}"),
    }
    Ok(rep.exit_code)
}

fn run_config(path: PathBuf, out: Option<PathBuf>) -> Result<i32, CliError> {
    let c = config::load(&path)?;
    let exp = c
        .file
        .experiment
        .clone()
        .ok_or_else(|| CliError::new("config", "config has no 'experiment' field"))?;
    let common = Common {
        config: Some(path),
        out,
        seed: 0,
    };
    fn go<P: Args + FromArgMatches + Serialize + DeserializeOwned>(
        exp: &str,
        common: Common,
        run: Runner<P>,
    ) -> Result<i32, CliError> {
        execute(exp, config::defaults::<P>()?, common, run)
    }
    match exp.as_str() {
        "check-rank" => go(&exp, common, check_rank),
        "decompose" => go(&exp, common, decompose),
        "pairing" => go(&exp, common, pairing),
        "counterexample" => go(&exp, common, counterexample),
        "table1" => go(&exp, common, table1),
        "truncate" => go(&exp, common, truncate),
        "hardy" => go(&exp, common, hardy),
        "extension-identity" => go(&exp, common, extension_identity),
        "thmD" => go(&exp, common, thm_d),
        "orlicz" => go(&exp, common, orlicz),
        other => {
            let ids: Vec<&str> = registry::EXPERIMENTS.iter().map(|e| e.0).collect();
            Err(CliError::unknown(other, &ids))
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<i32, CliError> {
    match cmd {
        Cmd::CheckRank { common, params } => execute("check-rank", params, common, check_rank),
        Cmd::Decompose { common, params } => execute("decompose", params, common, decompose),
        Cmd::Pairing { common, params } => execute("pairing", params, common, pairing),
        Cmd::Counterexample { common, params } => execute("counterexample", params, common, counterexample),
        Cmd::Table1 { common, params } => execute("table1", params, common, table1),
        Cmd::Truncate { common, params } => execute("truncate", params, common, truncate),
        Cmd::Hardy { common, params } => execute("hardy", params, common, hardy),
        Cmd::ExtensionIdentity { common, params } => {
            execute("extension-identity", params, common, extension_identity)
        }
        Cmd::ThmD { common, params } => execute("thmD", params, common, thm_d),
        Cmd::Orlicz { common, params } => execute("orlicz", params, common, orlicz),
        Cmd::Run { config, out } => run_config(config, out),
        Cmd::List => {
            let text = serde_json::to_string_pretty(&registry::all()).expect("registry serializes");
            println!("{text}");
            Ok(0)
        }
        Cmd::Describe { id } => {
            let e = registry::describe(&id)?;
            println!("{}", serde_json::to_string_pretty(&e).expect("entry serializes"));
            Ok(0)
        }
    }
}

fn fail(e: CliError) -> i32 {
    let text = serde_json::to_string(&json!({ "error": e })).expect("error serializes");
    let _ = writeln!(std::io::stderr(), "{text}");
    1
}

fn main() {
    let code = match Cli::try_parse() {
        Ok(cli) => dispatch(cli.cmd).unwrap_or_else(fail),
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                let _ = e.print();
                0
            }
            _ => fail(CliError::new("usage", e.to_string())),
        },
    };
    std::process::exit(code);
}
