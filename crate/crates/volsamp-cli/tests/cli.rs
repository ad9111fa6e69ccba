//! End-to-end tests of the `volsamp` binary: exit codes, JSON output
//! shapes, seed handling, and file round-trips.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

/// A command for the built binary with the ambient seed variable cleared,
/// so tests see only the seeds they set themselves.
fn volsamp() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_volsamp"));
    cmd.env_remove("VOLSAMP_SEED");
    cmd
}

fn write_file(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    path
}

/// 5x2 matrix in general position (every pair of rows is independent).
const MATRIX_5X2: &str = "1 0\n0 1\n1 1\n1 -1\n2 1\n";

/// Dense regression data: response in the first column, one feature.
const REGRESSION_6X1: &str = "1.0 1.0\n0.5 2.0\n-0.3 3.0\n2.0 -1.0\n0.1 0.5\n1.5 4.0\n";

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "expected success, stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

#[test]
fn sample_is_deterministic_for_a_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let matrix = write_file(dir.path(), "x.txt", MATRIX_5X2);
    let run = || {
        volsamp()
            .args(["sample"])
            .arg(&matrix)
            .args(["--method", "volume", "--k", "3", "--seed", "42"])
            .output()
            .unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first.stdout, second.stdout);
    let body = stdout_json(&first);
    assert_eq!(body["method"], "volume");
    assert_eq!(body["n"], 5);
    assert_eq!(body["d"], 2);
    assert_eq!(body["seed"], 42);
    let indices: Vec<usize> = serde_json::from_value(body["indices"].clone()).unwrap();
    assert_eq!(indices.len(), 3);
    assert!(indices.windows(2).all(|w| w[0] < w[1]));
    assert!(indices.iter().all(|&i| i < 5));
    assert!(body.get("weights").is_none(), "subsets carry no weights");
}

#[test]
fn sampling_every_row_returns_the_identity_subset() {
    let dir = TempDir::new().unwrap();
    let matrix = write_file(dir.path(), "eye.txt", "1 0 0\n0 1 0\n0 0 1\n");
    let out = volsamp()
        .args(["sample"])
        .arg(&matrix)
        .args(["--method", "volume", "--k", "3", "--seed", "1"])
        .output()
        .unwrap();
    let body = stdout_json(&out);
    assert_eq!(body["indices"], serde_json::json!([0, 1, 2]));
}

#[test]
fn sequence_methods_report_rescale_weights() {
    let dir = TempDir::new().unwrap();
    let matrix = write_file(dir.path(), "x.txt", MATRIX_5X2);
    let out = volsamp()
        .args(["sample"])
        .arg(&matrix)
        .args(["--method", "leveraged-volume", "--k", "4", "--seed", "9"])
        .output()
        .unwrap();
    let body = stdout_json(&out);
    let indices: Vec<usize> = serde_json::from_value(body["indices"].clone()).unwrap();
    let weights: Vec<f64> = serde_json::from_value(body["weights"].clone()).unwrap();
    assert_eq!(indices.len(), 4);
    assert_eq!(weights.len(), 4);
    assert!(weights.iter().all(|&w| w > 0.0));
}

#[test]
fn subset_size_below_dimension_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let matrix = write_file(dir.path(), "eye.txt", "1 0 0\n0 1 0\n0 0 1\n");
    let out = volsamp()
        .args(["sample"])
        .arg(&matrix)
        .args(["--method", "volume", "--k", "1", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("below the column dimension"), "{stderr}");
}

#[test]
fn malformed_matrix_exits_with_the_input_error_code() {
    let dir = TempDir::new().unwrap();
    let matrix = write_file(dir.path(), "bad.txt", "1 2\nthree 4\n");
    let out = volsamp()
        .args(["sample"])
        .arg(&matrix)
        .args(["--method", "volume", "--k", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn missing_input_file_exits_with_the_input_error_code() {
    let out = volsamp()
        .args(["experiment", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_env_variable_substitutes_for_the_flag() {
    let dir = TempDir::new().unwrap();
    let matrix = write_file(dir.path(), "x.txt", MATRIX_5X2);
    let flagged = volsamp()
        .args(["sample"])
        .arg(&matrix)
        .args(["--method", "volume", "--k", "3", "--seed", "7"])
        .output()
        .unwrap();
    let from_env = volsamp()
        .args(["sample"])
        .arg(&matrix)
        .args(["--method", "volume", "--k", "3"])
        .env("VOLSAMP_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(flagged.stdout, from_env.stdout);

    let bad_env = volsamp()
        .args(["sample"])
        .arg(&matrix)
        .args(["--method", "volume", "--k", "3"])
        .env("VOLSAMP_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(2));
}

#[test]
fn verify_identities_suite_passes_and_writes_reports() {
    let dir = TempDir::new().unwrap();
    let reports = dir.path().join("reports.jsonl");
    let out = volsamp()
        .args(["verify", "--suite", "identities", "--out"])
        .arg(&reports)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(", 0 failed"), "{stderr}");
    let text = std::fs::read_to_string(&reports).unwrap();
    let mut count = 0;
    for line in text.lines() {
        let report: Value = serde_json::from_str(line).unwrap();
        assert_eq!(report["passed"], true, "failing report: {line}");
        count += 1;
    }
    assert!(count > 20, "expected a full identity suite, got {count}");
}

#[test]
fn injected_failure_flips_the_exit_code() {
    let out = volsamp()
        .args(["verify", "--suite", "identities", "--inject-failure"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("1 failed"), "{stderr}");
    assert!(stderr.contains("[FAIL] injected_failure"), "{stderr}");
}

#[test]
fn experiment_writes_record_and_summary_csv() {
    let dir = TempDir::new().unwrap();
    let data = write_file(dir.path(), "toy.txt", REGRESSION_6X1);
    let config = write_file(
        dir.path(),
        "config.json",
        &format!(
            r#"{{"dataset": {:?}, "methods": ["volume"], "k_grid": [2], "repetitions": 2, "root_seed": 3}}"#,
            data.to_str().unwrap()
        ),
    );
    let records = dir.path().join("records.csv");
    let summary = dir.path().join("summary.csv");
    let out = volsamp()
        .args(["experiment"])
        .arg(&config)
        .arg("--records")
        .arg(&records)
        .arg("--summary")
        .arg(&summary)
        .output()
        .unwrap();
    let body = stdout_json(&out);
    assert_eq!(body["records"], 2);
    assert_eq!(body["failures"], 0);

    let records_text = std::fs::read_to_string(&records).unwrap();
    let record_lines: Vec<&str> = records_text.lines().collect();
    assert_eq!(
        record_lines[0],
        "dataset,method,k,repetition,loss,loss_ratio"
    );
    assert_eq!(record_lines.len(), 3, "header plus one line per repetition");
    assert!(record_lines[1].starts_with("toy,volume,2,0,"));
    assert!(record_lines[2].starts_with("toy,volume,2,1,"));

    let summary_text = std::fs::read_to_string(&summary).unwrap();
    let summary_lines: Vec<&str> = summary_text.lines().collect();
    assert_eq!(summary_lines[0], "method,k,mean_loss,stderr");
    assert_eq!(summary_lines.len(), 2, "header plus one aggregated cell");
    assert!(summary_lines[1].starts_with("volume,2,"));
}

#[test]
fn lowerbound_with_every_row_selected_is_exact() {
    let out = volsamp()
        .args([
            "lowerbound",
            "--n",
            "6",
            "--d",
            "1",
            "--k",
            "6",
            "--reps",
            "3",
            "--target-loss",
            "0.5",
            "--seed",
            "2",
        ])
        .output()
        .unwrap();
    let body = stdout_json(&out);
    assert_eq!(body["n"], 6);
    assert_eq!(body["d"], 1);
    assert_eq!(body["k"], 6);
    assert_eq!(body["repetitions"], 3);
    let optimum = body["optimum_loss"].as_f64().unwrap();
    assert!((optimum - 0.5).abs() < 1e-9, "calibrated loss: {optimum}");
    let mean = body["mean_ratio"].as_f64().unwrap();
    assert!((mean - 1.0).abs() < 1e-9, "full sample is the optimum");
    assert_eq!(body["tail_probability"].as_f64().unwrap(), 0.0);
    assert!(body["gamma"].as_f64().unwrap() > 0.0);
}

#[test]
fn unknown_flags_are_rejected() {
    let out = volsamp().args(["lowerbound", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_with_every_row_recovers_the_optimum() {
    let dir = TempDir::new().unwrap();
    let data = write_file(dir.path(), "toy.txt", REGRESSION_6X1);
    let out = volsamp()
        .args(["estimate"])
        .arg(&data)
        .args(["--method", "volume", "--k", "6", "--seed", "5"])
        .output()
        .unwrap();
    let body = stdout_json(&out);
    assert_eq!(body["n"], 6);
    assert_eq!(body["d"], 1);
    let ratio = body["loss_ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 1e-9, "ratio: {ratio}");
    let weights: Vec<f64> = serde_json::from_value(body["weights"].clone()).unwrap();
    assert_eq!(weights.len(), 1);
    let loss = body["loss"].as_f64().unwrap();
    let optimum = body["optimum_loss"].as_f64().unwrap();
    assert!((loss - optimum).abs() <= 1e-9 * optimum.max(1.0));
}
