use serde_json::Value;
use std::process::{Command, Output};

fn ordwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordwalk")).args(args).env_remove("ORDWALK_SEED").output().expect("binary runs")
}

fn manifest(out: &Output) -> Value {
    assert!(out.status.success(), "exit {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "one manifest line expected, got {text}");
    serde_json::from_str(lines[0]).unwrap()
}

fn value(args: &[&str]) -> f64 {
    manifest(&ordwalk(args))["outputs"]["value"].as_f64().unwrap()
}

#[test]
fn eval_examples() {
    assert!((value(&["eval", "h", "--rates", "1,1", "--x", "0,1"]) - 2.0).abs() < 1e-12);
    assert!((value(&["eval", "xconst", "--d", "2"]) - 0.5641896).abs() < 1e-7);
    assert!((value(&["eval", "h", "--rates", "2,1", "--x", "0,1"]) - (1.0 - 0.5 * (-1f64).exp())).abs() < 1e-12);
}

#[test]
fn eval_output_carries_log_form() {
    let m = manifest(&ordwalk(&["eval", "h", "--x", "0,1"]));
    let o = &m["outputs"];
    assert_eq!(o["sign"], 1);
    assert!((o["log_value"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);
    assert_eq!(m["command"], "eval h");
    assert!(m["version"].is_string() && m["wall_time"].is_number());
}

#[test]
fn negative_coordinates_parse() {
    assert!((value(&["eval", "h", "--x", "-1,0"]) - 2.0).abs() < 1e-12);
}

#[test]
fn simulate_examples() {
    let m = manifest(&ordwalk(&["simulate", "survival", "--kill", "rho", "--x", "0,1", "--n", "1", "--samples", "1000000", "--seed", "7"]));
    let (est, se) = (m["outputs"]["estimate"].as_f64().unwrap(), m["outputs"]["stderr"].as_f64().unwrap());
    assert!((est - (1.0 - (-1f64).exp())).abs() < 3.0 * se, "{est} +- {se}");
    assert_eq!(m["seed"], 7);

    let m = manifest(&ordwalk(&["simulate", "lpp", "--d", "2", "--n", "2", "--samples", "1000000"]));
    let (est, se) = (m["outputs"]["estimate"].as_f64().unwrap(), m["outputs"]["stderr"].as_f64().unwrap());
    assert!((est - 3.5).abs() < 3.0 * se, "{est} +- {se}");

    let m = manifest(&ordwalk(&["simulate", "coupling", "--d", "3", "--n", "10", "--trials", "100"]));
    assert_eq!(m["outputs"]["failures"], 0);
    assert_eq!(m["outputs"]["trials"], 100);
}

#[test]
fn other_experiments_run() {
    let m = manifest(&ordwalk(&["simulate", "queues", "--d", "3", "--n", "5", "--trials", "200"]));
    assert_eq!(m["outputs"]["mismatches"], 0);
    let m = manifest(&ordwalk(&["simulate", "pushblock", "--d", "2", "--n", "3", "--samples", "20000"]));
    assert!(m["outputs"]["ks_p_value"].as_f64().unwrap() > 1e-3);
    let m = manifest(&ordwalk(&["simulate", "htransform", "--x", "0,1", "--n", "4", "--samples", "20000"]));
    let (est, se) = (m["outputs"]["estimate"].as_f64().unwrap(), m["outputs"]["stderr"].as_f64().unwrap());
    assert!((est - 1.0).abs() < 5.0 * se, "{est} +- {se}");
    let m = manifest(&ordwalk(&["simulate", "zfromzero", "--rates", "1,2", "--n", "3", "--samples", "1000"]));
    assert_eq!(m["outputs"]["samples"], 1000);
}

#[test]
fn paths_write_csv() {
    let dir = std::env::temp_dir().join(format!("ordwalk-paths-{}", std::process::id()));
    let csv = dir.with_extension("csv");
    let m = manifest(&ordwalk(&["simulate", "paths", "--x", "0,1", "--n", "3", "--samples", "5", "--csv", csv.to_str().unwrap()]));
    assert_eq!(m["outputs"]["paths"], 5);
    let text = std::fs::read_to_string(&csv).unwrap();
    std::fs::remove_file(&csv).unwrap();
    // header plus one row per path and step
    assert_eq!(text.lines().count(), 1 + 5 * 4);
}

#[test]
fn fredholm_from_flags_and_json_agree() {
    let a = value(&["eval", "fredholm", "--x", "0,1", "--times", "6", "--thresholds", "9"]);
    let b = value(&["eval", "fredholm", "--spec", r#"{"start":[0,1],"times":[6],"thresholds":[9],"extreme":"largest"}"#]);
    assert_eq!(a, b);
    assert!((a - 0.5408204388).abs() < 1e-8);
}

#[test]
fn stochastic_outputs_repeat() {
    let args = ["simulate", "survival", "--x", "0,1,2", "--n", "3", "--samples", "50000", "--seed", "11"];
    assert_eq!(manifest(&ordwalk(&args))["outputs"], manifest(&ordwalk(&args))["outputs"]);
}

#[test]
fn seed_flag_beats_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ordwalk"));
        cmd.args(["simulate", "survival", "--x", "0,1", "--n", "2", "--samples", "20000"]);
        cmd.env_remove("ORDWALK_SEED");
        if let Some(e) = env {
            cmd.env("ORDWALK_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        manifest(&cmd.output().unwrap())
    };
    assert_eq!(run(Some("5"), None)["seed"], 5);
    assert_eq!(run(Some("5"), Some("9"))["seed"], 9);
    assert_eq!(run(Some("9"), None)["outputs"], run(None, Some("9"))["outputs"]);
}

#[test]
fn replay_reproduces_outputs() {
    let path = std::env::temp_dir().join(format!("ordwalk-manifest-{}.jsonl", std::process::id()));
    let _ = std::fs::remove_file(&path);
    let out = ordwalk(&["simulate", "survival", "--x", "0,1", "--n", "4", "--samples", "30000", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let m = manifest(&ordwalk(&["replay", path.to_str().unwrap()]));
    std::fs::remove_file(&path).unwrap();
    assert_eq!(m["outputs"]["identical"], true);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| ordwalk(args).status.code().unwrap();
    assert_eq!(code(&["eval", "h", "--x", "1,0"]), 2);
    assert_eq!(code(&["eval", "h"]), 2);
    assert_eq!(code(&["eval", "h", "--x", "0,1", "--rates", "1,-1"]), 2);
    assert_eq!(code(&["eval", "fredholm", "--spec", "{not json"]), 2);
    assert_eq!(code(&["eval", "survival", "--x", "0,1,2,3", "--n", "2"]), 3);
    assert_eq!(code(&["eval", "nonsense"]), 2);
}

#[test]
fn failures_print_no_manifest() {
    let out = ordwalk(&["eval", "density", "--x", "0,1", "--z", "1,0", "--n", "2"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn verify_subset() {
    let out = ordwalk(&["verify", "--only", "pfaffian"]);
    let m = manifest(&out);
    assert_eq!(m["outputs"]["passed"], true);
    assert_eq!(m["outputs"]["outcomes"].as_array().unwrap().len(), 1);
    let table = String::from_utf8(out.stderr).unwrap();
    assert!(table.contains("pfaffian") && table.contains("PASS"));
}
