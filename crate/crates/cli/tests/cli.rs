use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const RANDOM_DT: &str = r#"{"parametric": {"name": "random_dt",
    "params": {"states": 5, "min_actions": 2, "max_actions": 3, "seed": 11},
    "truncation": 5}}"#;

const BRAKED: &str = r#"{"parametric": {"name": "birth_death_dt",
    "params": {"cost": {"type": "capped", "cap": 0.5, "m": 5}, "brake": 0.95},
    "truncation": 256}}"#;

const BD_CT: &str = r#"{"parametric": {"name": "birth_death_ct", "truncation": 64}}"#;

const LEAKY: &str = r#"{"kind": "dt", "states": 2, "reference_state": 0, "closed": true,
    "actions": [["a"], ["a"]],
    "kernel": [[0, 0, 1, 0.7], [1, 0, 0, 1.0]],
    "cost": [[0, 0, 0.1], [1, 0, 0.2]]}"#;

fn riskeig(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskeig"))
        .args(args)
        .current_dir(cwd)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("RISKEIG_THREADS")
        .output()
        .unwrap()
}

fn write_model(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_prints_json_and_exits_zero() {
    let dir = TempDir::new().unwrap();
    write_model(dir.path(), "m.json", BD_CT);
    let o = riskeig(&["validate", "m.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kind"], "ct");
    assert_eq!(v["passed"], true);
    assert_eq!(v["lyapunov"]["passed"], true);
}

#[test]
fn invalid_model_exits_one() {
    let dir = TempDir::new().unwrap();
    write_model(dir.path(), "bad.json", LEAKY);
    let o = riskeig(&["validate", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["model"]["violations"][0]["quantity"], "row_sum");
    let o = riskeig(&["solve", "bad.json", "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("s").exists());
}

#[test]
fn usage_errors_exit_three() {
    let dir = TempDir::new().unwrap();
    assert_eq!(riskeig(&["solve"], dir.path()).status.code(), Some(3));
    assert_eq!(riskeig(&["frobnicate"], dir.path()).status.code(), Some(3));
    assert_eq!(
        riskeig(&["validate", "missing.json"], dir.path())
            .status
            .code(),
        Some(3)
    );
    let o = riskeig(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn compare_agrees_with_oracle_and_refuses_overwrite() {
    let dir = TempDir::new().unwrap();
    write_model(dir.path(), "m.json", RANDOM_DT);
    let args = ["compare", "m.json", "--out", "c", "--paths", "2000"];
    let o = riskeig(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&dir.path().join("c/report.json"));
    let oracle = report["oracle"]["lambda_star"].as_f64().unwrap();
    let ladder = report["ladder"]["lambda"].as_f64().unwrap();
    let pia = report["pia"]["lambda"].as_f64().unwrap();
    assert!((ladder - oracle).abs() < 1e-7);
    assert!((pia - oracle).abs() < 1e-7);
    let csv = fs::read_to_string(dir.path().join("c/compare.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "method,lambda,ci_low,ci_high,diff_vs_oracle,diff_vs_ladder"
    );
    assert_eq!(csv.lines().count(), 5);

    let before = fs::read(dir.path().join("c/report.json")).unwrap();
    let o = riskeig(&args, dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("--force"));
    let o = riskeig(&[&args[..], &["--force"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("c/report.json")).unwrap(), before);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    write_model(dir.path(), "m.json", RANDOM_DT);
    for out in ["a", "b"] {
        let o = riskeig(&["pia", "m.json", "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["report.json", "iters.csv", "policy.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let ma = json(&dir.path().join("a/manifest.json"));
    let mb = json(&dir.path().join("b/manifest.json"));
    assert_eq!(ma["timestamp"], 1_700_000_000);
    assert_eq!(ma["config"]["out"], "a");
    assert_eq!(ma["model_source"], mb["model_source"]);
    let text = fs::read_to_string(dir.path().join("a/iters.csv")).unwrap();
    let lambda0 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    let mantissa = lambda0.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.replace('.', "").len(), 17);
}

#[test]
fn manifest_lists_every_output_file() {
    let dir = TempDir::new().unwrap();
    write_model(dir.path(), "m.json", RANDOM_DT);
    let o = riskeig(&["oracle", "m.json", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest = json(&dir.path().join("o/manifest.json"));
    let mut listed: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let mut present: Vec<String> = fs::read_dir(dir.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    listed.sort();
    present.sort();
    assert_eq!(listed, present);
    assert_eq!(manifest["command"], "oracle");
    assert_eq!(manifest["config"]["threads"], 1);
    let csv = fs::read_to_string(dir.path().join("o/oracle.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + policy_count(&dir));
}

fn policy_count(dir: &TempDir) -> usize {
    let o = riskeig(&["validate", "m.json"], dir.path());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    v["policy_count"].as_u64().unwrap() as usize
}

#[test]
fn near_monotone_solve_reports_supersolution_residual() {
    let dir = TempDir::new().unwrap();
    write_model(dir.path(), "bd.json", BRAKED);
    let o = riskeig(
        &["solve", "bd.json", "--mode", "near-monotone", "--out", "s"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&dir.path().join("s/report.json"));
    assert_eq!(report["mode"], "near-monotone");
    let diag = &report["near_monotone"];
    assert!(diag["supersolution_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(diag["condition_holds"], true);
    let lambda = report["final_pair"]["rho"].as_f64().unwrap();
    assert!((lambda - 0.083141).abs() < 1e-5);
    let rungs = fs::read_to_string(dir.path().join("s/rungs.csv")).unwrap();
    assert!(rungs.starts_with("n,rho_n,iterations,cw_gap\n16,"));
}

#[test]
fn unstable_ladder_exits_two_and_keeps_its_report() {
    let dir = TempDir::new().unwrap();
    write_model(
        dir.path(),
        "t.json",
        r#"{"parametric": {"name": "birth_death_dt", "truncation": 256}}"#,
    );
    let o = riskeig(&["solve", "t.json", "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let report = json(&dir.path().join("s/report.json"));
    assert_eq!(report["converged"], false);
    assert!(dir.path().join("s/manifest.json").exists());
}

#[test]
fn simulate_reads_policy_file() {
    let dir = TempDir::new().unwrap();
    write_model(dir.path(), "m.json", RANDOM_DT);
    riskeig(&["oracle", "m.json", "--out", "o"], dir.path());
    let args = [
        "simulate",
        "m.json",
        "--policy",
        "o/policy.json",
        "--horizon",
        "50",
        "--paths",
        "512",
        "--seed",
        "3",
        "--threads",
        "2",
        "--out",
        "m",
    ];
    let o = riskeig(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let est: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(est["ci_low"].as_f64().unwrap() <= est["point"].as_f64().unwrap());
    assert_eq!(est["paths"], 512);
    fs::write(dir.path().join("p.json"), r#"{"action_index": [0, 0]}"#).unwrap();
    let o = riskeig(
        &[
            "simulate",
            "m.json",
            "--policy",
            "p.json",
            "--horizon",
            "5",
            "--paths",
            "64",
            "--seed",
            "1",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
}
