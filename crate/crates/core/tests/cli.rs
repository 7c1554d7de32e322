use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gapestim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapestim")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn oracle_two_state() {
    let out = gapestim(&["oracle", "--family", "two-state", "--p", "0.25", "--q", "0.25"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["gamma"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["pi_star"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    // The eigensolver lands a few ulps from 0.5, which sits on a k_gamma
    // boundary, so compare against the library evaluated at the same gamma.
    let gamma = v["gamma"].as_f64().unwrap();
    let sample = gapestim::doubling::SampleSizeParams { epsilon: 0.1, delta: 0.1, gamma, pi_star: 0.5, n: 2, c: 1.0 };
    assert_eq!(v["t0"].as_u64(), Some(gapestim::doubling::t0_steps(&sample).unwrap()));
    assert_eq!(v["k_gamma"].as_u64(), Some(gapestim::doubling::k_gamma(gamma).unwrap() as u64));
}

#[test]
fn selfcheck_passes() {
    let out = gapestim(&["selfcheck"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("all suites PASS"), "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn missing_family_parameter_is_usage_error() {
    let out = gapestim(&["oracle", "--family", "two-state", "--p", "0.25"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "UsageError");
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(gapestim(&["estimate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn out_of_range_state_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("bad.traj");
    std::fs::write(&traj, "gapestim-traj v1 n=2 seed=0 len=3\n0\n1\n5\n").unwrap();
    let out = gapestim(&["estimate", "--traj", path(&traj)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "ValidationError");
}

#[test]
fn truncated_file_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("short.traj");
    std::fs::write(&traj, "gapestim-traj v1 n=2 seed=0 len=4\n0\n1\n").unwrap();
    let out = gapestim(&["estimate", "--traj", path(&traj)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "FormatError");
}

#[test]
fn invalid_chain_parameter_is_validation_error() {
    let out = gapestim(&["oracle", "--family", "two-state", "--p", "1.5", "--q", "0.2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_then_estimate_and_double() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("run.traj");
    let sim = gapestim(&[
        "simulate", "--family", "lazy-cycle", "--states", "8", "--t", "200000", "--seed", "3", "--out", path(&traj),
    ]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    assert_eq!(stdout_json(&sim)["t"], 200_000);

    let gamma = gapestim::chain::lazy_cycle_gap(8);
    let est = stdout_json(&gapestim(&["estimate", "--traj", path(&traj)]));
    assert!((est["gamma_hat"].as_f64().unwrap() - gamma).abs() < 0.02);

    let dbl = gapestim(&["doubling", "--traj", path(&traj), "--family", "lazy-cycle", "--states", "8"]);
    assert!(dbl.status.success(), "{}", String::from_utf8_lossy(&dbl.stderr));
    let v = stdout_json(&dbl);
    let tilde = v["gamma_tilde"].as_f64().unwrap();
    assert!((tilde / gamma - 1.0).abs() < 0.2, "{tilde} vs {gamma}");
    assert!(v["A"].as_u64().unwrap().is_power_of_two());
    assert!(v["guarantee"].is_object());
    assert!((v["gamma"].as_f64().unwrap() - gamma).abs() < 1e-12);
}

#[test]
fn doubling_rejects_mismatched_chain() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("run.traj");
    gapestim(&["simulate", "--family", "complete", "--states", "4", "--t", "1000", "--out", path(&traj)]);
    let out = gapestim(&["doubling", "--traj", path(&traj), "--family", "complete", "--states", "5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn chain_file_family() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("chain.json");
    std::fs::write(&file, r#"{"n": 2, "P": [[0.9, 0.1], [0.2, 0.8]], "label": "custom"}"#).unwrap();
    let v = stdout_json(&gapestim(&["oracle", "--family", "file", "--chain-file", path(&file)]));
    assert!((v["gamma"].as_f64().unwrap() - 0.3).abs() < 1e-12);
    assert!((v["pi_star"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["chain"], "custom");

    std::fs::write(&file, r#"{"n": 2, "P": [[0.9, 0.2], [0.2, 0.8]]}"#).unwrap();
    assert_eq!(gapestim(&["oracle", "--family", "file", "--chain-file", path(&file)]).status.code(), Some(3));
}

#[test]
fn experiment_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{
            "version": 1,
            "chain": {"family": "two-state", "p": 0.25, "q": 0.25},
            "lengths": [1000, 10000],
            "replicas": 8,
            "base_seed": 5,
            "estimator": "hks",
            "start": "stationary"
        }"#,
    )
    .unwrap();
    let prefix = dir.path().join("out");
    let out = gapestim(&["experiment", "--spec", path(&spec), "--out", path(&prefix)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], gapestim::experiment::CSV_HEADER);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), csv);

    let report: Value = serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert_eq!(report["rows"][0]["replicas"], 8);
}

#[test]
fn experiment_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"version": 1, "chain": {"family": "lazy-cycle", "n": 6}, "lengths": [5000],
            "replicas": 12, "base_seed": 9, "estimator": "doubling"}"#,
    )
    .unwrap();
    let run = |threads: &str, name: &str| {
        let prefix = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_gapestim"))
            .args(["experiment", "--spec", path(&spec), "--out", path(&prefix)])
            .env(gapestim::experiment::THREADS_ENV, threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(prefix.with_extension("csv")).unwrap()
    };
    assert_eq!(run("1", "one"), run("4", "four"));
}

#[test]
fn experiment_rejects_bad_version() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"version": 2, "chain": {"family": "complete", "n": 3}, "lengths": [100], "replicas": 1, "base_seed": 0, "estimator": "hks"}"#,
    )
    .unwrap();
    assert_eq!(gapestim(&["experiment", "--spec", path(&spec)]).status.code(), Some(3));
}
