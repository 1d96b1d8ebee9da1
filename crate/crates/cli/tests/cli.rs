use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn workdir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("cc-lab-test-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn cc_lab(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_cc-lab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn csv_body(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn error_object(r: &Run) -> Value {
    let v: Value = serde_json::from_str(r.stderr.trim()).expect("stderr holds one JSON object");
    v["error"].clone()
}

fn report(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn table1_matches_expected_pattern() {
    let d = workdir("table1");
    let r = cc_lab(&d, &["table1", "--out", "table1.csv"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let body = csv_body(&d.join("table1.csv"));
    let rows: Vec<Vec<&str>> = body.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let got: Vec<[&str; 3]> = rows.iter().map(|r| [r[2], r[3], r[4]]).collect();
    assert_eq!(
        got,
        vec![
            ["fails", "fails", "fails"],
            ["converges", "fails", "fails"],
            ["converges", "fails", "converges"],
            ["converges", "converges", "fails"],
        ]
    );
    let meta = std::fs::read_to_string(d.join("table1.csv")).unwrap();
    assert!(meta.contains("# column measure: measured"));
    assert!(meta.contains("# column expected: expected"));
    assert_eq!(report(&d.join("table1.json"))["status"], "pass");
}

#[test]
fn inconclusive_margins_exit_two() {
    let d = workdir("inconclusive");
    let r = cc_lab(
        &d,
        &["table1", "--scenario", "iii", "--converge-tol", "1e-9", "--fail-tol", "0.99", "--out", "t.json"],
    );
    assert_eq!(r.code, 2, "{}{}", r.stdout, r.stderr);
    assert_eq!(report(&d.join("t.json"))["status"], "inconclusive");
}

#[test]
fn concentrating_square_pairing_column_is_one() {
    let d = workdir("ex61");
    let r = cc_lab(&d, &["pairing", "--seq", "ex61", "--j", "2:64", "--out", "p.json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let body = csv_body(&d.join("p.pairings.csv"));
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let vals: Vec<f64> = rdr.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(vals.len(), 6);
    assert!(vals.iter().all(|v| (v - 1.0).abs() < 1e-12), "{vals:?}");
}

#[test]
fn case3_torus_run_reports_closed_form() {
    let d = workdir("case3");
    let r = cc_lab(
        &d,
        &["counterexample", "--case", "jac_case3", "--n", "2", "--alpha", "0.5", "--k", "4:32", "--mode", "torus", "--out", "case3.json"],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = report(&d.join("case3.json"));
    let rate = &rep["result"]["report"]["rate"];
    let ks: Vec<u64> = rate["indices"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(ks, vec![4, 8, 16, 32]);
    for (k, p) in ks.iter().zip(rate["pairings"].as_array().unwrap()) {
        let oracle = std::f64::consts::PI.powi(2) * (1..=*k).map(|l| 1.0 / (l as f64 + 1.0)).sum::<f64>();
        assert!((p.as_f64().unwrap() - oracle).abs() < 1e-12 * oracle);
    }
}

#[test]
fn grid_mode_case3_is_not_applicable() {
    let d = workdir("case3grid");
    let r = cc_lab(&d, &["counterexample", "--case", "jac_case3", "--mode", "grid"]);
    assert_eq!(r.code, 1);
    assert_eq!(error_object(&r)["kind"], "not_applicable");
}

#[test]
fn malformed_config_is_a_machine_readable_error() {
    let d = workdir("badcfg");
    std::fs::write(d.join("bad.json"), r#"{"version": 1, "params": {"case": "ex61"}, "bogus": true}"#).unwrap();
    let r = cc_lab(&d, &["counterexample", "--config", "bad.json"]);
    assert_eq!(r.code, 1);
    let e = error_object(&r);
    assert_eq!(e["kind"], "config");
    assert!(e["message"].as_str().unwrap().contains("bogus"));

    std::fs::write(d.join("unk.json"), r#"{"version": 1, "params": {"cas": "ex61"}}"#).unwrap();
    let r = cc_lab(&d, &["counterexample", "--config", "unk.json"]);
    assert_eq!(r.code, 1);
    assert!(error_object(&r)["message"].as_str().unwrap().contains("cas"));

    std::fs::write(d.join("ver.json"), r#"{"version": 7}"#).unwrap();
    let r = cc_lab(&d, &["orlicz", "--config", "ver.json"]);
    assert_eq!(r.code, 1);
    assert!(error_object(&r)["message"].as_str().unwrap().contains("version"));

    std::fs::write(d.join("trunc.json"), "{\"version\": 1,").unwrap();
    let r = cc_lab(&d, &["orlicz", "--config", "trunc.json"]);
    assert_eq!(r.code, 1);
    assert_eq!(error_object(&r)["kind"], "config");
}

#[test]
fn config_run_matches_flag_run() {
    let d = workdir("cfgrun");
    std::fs::write(
        d.join("c.json"),
        r#"{"version": 1, "experiment": "truncate", "seed": 4, "params": {"n": 2, "count": 2}}"#,
    )
    .unwrap();
    let a = cc_lab(&d, &["run", "--config", "c.json", "--out", "a.json"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    let b = cc_lab(&d, &["truncate", "--n", "2", "--count", "2", "--seed", "4", "--out", "b.json"]);
    assert_eq!(b.code, 0, "{}", b.stderr);
    assert_eq!(
        std::fs::read(d.join("a.truncation.csv")).unwrap(),
        std::fs::read(d.join("b.truncation.csv")).unwrap()
    );
    let rep = report(&d.join("a.json"));
    assert_eq!(rep["seed"], 4);
    assert!(rep["input_hashes"]["config_file"].as_str().unwrap().len() == 64);

    // Config values override flags.
    let c = cc_lab(&d, &["truncate", "--config", "c.json", "--count", "5", "--out", "c.json.out.json"]);
    assert_eq!(c.code, 0);
    assert_eq!(report(&d.join("c.json.out.json"))["config"]["count"], 2);
}

#[test]
fn csv_bodies_are_deterministic_per_seed() {
    let d = workdir("determinism");
    for (name, seed) in [("a", "9"), ("b", "9"), ("c", "10")] {
        let out = format!("{name}.csv");
        let r = cc_lab(&d, &["decompose", "--count", "3", "--seed", seed, "--out", &out]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    let a = std::fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.csv")).unwrap());
    assert_ne!(csv_body(&d.join("a.csv")), csv_body(&d.join("c.csv")));
    let ra = report(&d.join("a.json"));
    let rb = report(&d.join("b.json"));
    assert_eq!(ra["result"], rb["result"]);
    assert_eq!(ra["input_hashes"], rb["input_hashes"]);
}

#[test]
fn describe_and_list() {
    let d = workdir("registry");
    let r = cc_lab(&d, &["describe", "jac_case3"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("n_ℓ = k^{n²/α} 8^ℓ"), "{}", r.stdout);

    let r = cc_lab(&d, &["describe", "jac_cas3"]);
    assert_eq!(r.code, 1);
    let e = error_object(&r);
    assert_eq!(e["kind"], "unknown_id");
    assert_eq!(e["suggestion"], "jac_case3");

    let r = cc_lab(&d, &["list"]);
    assert_eq!(r.code, 0);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    let kinds: std::collections::BTreeSet<&str> =
        v.as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    for k in ["experiment", "sequence", "operator", "integrand", "norm_tag", "test_function"] {
        assert!(kinds.contains(k), "missing {k}");
    }
}

#[test]
fn unknown_operator_suggests_nearest() {
    let d = workdir("op");
    let r = cc_lab(&d, &["check-rank", "--op", "dvi2"]);
    assert_eq!(r.code, 1);
    assert_eq!(error_object(&r)["suggestion"], "div2");
    let r = cc_lab(&d, &["check-rank", "--op", "divcurl2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["result"]["rank"]["constant"], true);
}

#[test]
fn orlicz_and_thm_d_gates_pass() {
    let d = workdir("misc");
    let r = cc_lab(&d, &["orlicz", "--out", "o.json"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let r = cc_lab(&d, &["thmD", "--alpha", "0.5", "--s", "2", "--ensemble", "4", "--out", "thmD.json"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let rep = report(&d.join("thmD.json"));
    assert_eq!(rep["result"]["items"].as_array().unwrap().len(), 19);
}

#[test]
fn usage_errors_exit_one_with_json() {
    let d = workdir("usage");
    let r = cc_lab(&d, &["frobnicate"]);
    assert_eq!(r.code, 1);
    assert_eq!(error_object(&r)["kind"], "usage");
    let r = cc_lab(&d, &["counterexample"]);
    assert_eq!(r.code, 1);
    assert!(error_object(&r)["message"].as_str().unwrap().contains("--case"));
}
