// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use selfnorm_cli::report::CliReport;
use serde_json::Value;

fn selfnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfnorm")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn constant_column_is_degenerate_and_not_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "c.csv", "4\n4\n4\n4\n4\n");
    for stat in ["q", "r"] {
        let json = stdout_json(&selfnorm(&["test", "--input", &input, "--stat", stat, "--B", "99"]));
        assert_eq!(json["test"]["observed"]["value"], 0.0);
        assert_eq!(json["test"]["observed"]["degenerate"], true);
        assert_eq!(json["test"]["reject"], false);
    }
}

#[test]
fn step_series_estimate_reports_index_and_label() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.csv", "year,value\n2001,0\n2002,0\n2003,0\n2004,1\n2005,1\n2006,1\n");
    let out = selfnorm(&["estimate", "--input", &input]);
    let report: CliReport = serde_json::from_slice(&out.stdout).unwrap();
    let estimate = report.estimate.unwrap();
    assert_eq!(estimate.tau_hat, 3);
    assert_eq!(estimate.label.as_deref(), Some("2003"));
    assert_eq!(estimate.objective, f64::INFINITY);
    assert_eq!(report.input.n, 6);
    assert_eq!(report.input.sha256.len(), 64);
}

#[test]
fn invalid_input_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let nan = write(dir.path(), "nan.csv", "1\n2\nNaN\n4\n");
    let out = selfnorm(&["test", "--input", &nan]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let short = write(dir.path(), "short.csv", "1\n");
    assert_eq!(selfnorm(&["estimate", "--input", &short]).status.code(), Some(2));

    let missing = dir.path().join("absent.csv");
    assert_eq!(selfnorm(&["test", "--input", missing.to_str().unwrap()]).status.code(), Some(2));

    let ok = write(dir.path(), "ok.csv", "1\n2\n3\n");
    let out = selfnorm(&["test", "--input", &ok, "--stat", "cusum", "--method", "bootstrap"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fail_on_reject_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let values: String = (0..60).map(|k| format!("{}\n", if k < 30 { 0.0 } else { 5.0 } + (k % 3) as f64 * 0.1)).collect();
    let input = write(dir.path(), "step.csv", &values);
    let base = ["test", "--input", &input, "--B", "199"];
    assert_eq!(selfnorm(&base).status.code(), Some(0));
    let out = selfnorm(&[&base[..], &["--fail-on-reject"]].concat());
    assert_eq!(out.status.code(), Some(1));
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["test"]["reject"], true);
    assert_eq!(json["estimate"]["tau_hat"], 30);
}

#[test]
fn test_report_is_reproducible_and_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("g.csv");
    let gen = |seed: &str| {
        selfnorm(&["generate", "--dgp", "ar1", "--n", "80", "--seed", seed, "--output", series.to_str().unwrap()])
    };
    assert!(gen("7").status.success());
    let first = std::fs::read_to_string(&series).unwrap();
    assert!(gen("7").status.success());
    assert_eq!(std::fs::read_to_string(&series).unwrap(), first);
    assert_eq!(first.lines().count(), 81);

    let report_path = dir.path().join("report.json");
    let args = [
        "test", "--input", series.to_str().unwrap(), "--stat", "r", "--B", "99", "--seed", "5",
        "--output", report_path.to_str().unwrap(),
    ];
    let a = selfnorm(&args);
    let b = selfnorm(&args);
    assert_eq!(a.stdout, b.stdout);
    let from_file: CliReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let from_stdout: CliReport = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(from_file, from_stdout);
    let test = from_file.test.unwrap();
    assert_eq!(test.replications, Some(99));
    let p = test.p_value.unwrap();
    assert!((0.01..=1.0).contains(&p));
}

#[test]
fn generate_accepts_json_model() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{"n": 50, "mu": 1.0, "delta": 2.0, "tau": 25, "errors": {"model": "iid"}, "innovations": "normal"}"#,
    );
    let out = selfnorm(&["generate", "--spec", &spec, "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn asymptotic_mode_uses_simulated_quantiles() {
    let dir = tempfile::tempdir().unwrap();
    let values: String = (0..40).map(|k| format!("{}\n", ((k * 7) % 5) as f64)).collect();
    let input = write(dir.path(), "x.csv", &values);
    let json = stdout_json(&selfnorm(&[
        "test", "--input", &input, "--method", "asymptotic", "--m", "100", "--runs", "2000",
    ]));
    assert_eq!(json["test"]["method"], "asymptotic");
    assert!(json["test"]["p_value"].is_null());
    let crit = json["test"]["critical_value"].as_f64().unwrap();
    assert!(crit > 1.0 && crit < 3.0, "{crit}");
}

#[test]
fn crit_writes_json_and_csv_tables() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("t.json");
    let csv_path = dir.path().join("t.csv");
    let out = selfnorm(&[
        "crit", "--functional", "s", "--m", "100", "--runs", "2000", "--levels", "90,0.95",
        "--output", json_path.to_str().unwrap(), "--csv", csv_path.to_str().unwrap(),
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["levels"], serde_json::json!([0.9, 0.95]));
    let q = json["quantiles"].as_array().unwrap();
    assert!(q[0].as_f64().unwrap() < q[1].as_f64().unwrap());
    assert!(json_path.exists());
    assert_eq!(std::fs::read_to_string(&csv_path).unwrap().lines().count(), 3);
}

#[test]
fn experiment_writes_per_cell_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let out = selfnorm(&[
        "experiment", "--desk", "--cells", "iid_null_n400", "--methods", "q_bootstrap,r_bootstrap",
        "--reps", "20", "--B", "19", "--alphas", "0.05", "--seed", "2", "--out-dir", out_dir.to_str().unwrap(),
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["config"]["repetitions"], 20);
    for name in ["iid_null_n400_q_bootstrap.csv", "iid_null_n400_r_bootstrap.csv", "rejection_rates.csv", "summary.json"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let csv = std::fs::read_to_string(out_dir.join("rejection_rates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let bad = selfnorm(&["experiment", "--cells", "iid_null_n400", "--methods", "nope", "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("nope"));
}
