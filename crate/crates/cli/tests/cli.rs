//! End-to-end checks of the command line: exit codes, artifact layout,
//! thread-count invariance, and tamper detection in `reproduce`.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rwmlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rwmlab"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run_ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SAMPLE_CONFIG: &str = r#"{
  "kind": "sample",
  "seed": 424242,
  "target": {"name": "standard-normal", "params": {"k": 1}},
  "lambda": "identity",
  "l": 2.38,
  "d": 16,
  "r": 1,
  "t_horizon": 1.0,
  "stride": 0.25,
  "n_replicas": 48,
  "l_grid": [1.0, 2.38],
  "output_dir": "UNSET"
}"#;

#[test]
fn tune_reports_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tune.json",
        r#"{
          "kind": "tune",
          "seed": 1,
          "target": {"name": "gaussian", "params": {"gamma": [[1.0, 0.0], [0.0, 0.25]]}},
          "lambda": "identity",
          "output_dir": "out"
        }"#,
    );
    let out = run_ok(
        rwmlab()
            .current_dir(dir.path())
            .args(["tune", "--config"])
            .arg(&cfg)
            .output()
            .unwrap(),
    );
    assert!(out.contains("l_opt"), "{out}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    let rep = &report["report"];
    // Sigma = Gamma^{-1} = diag(1,4): Sigma:I = 5, so l_opt = 2.3812/sqrt(5)
    let l_opt = rep["l_opt"].as_f64().unwrap();
    assert!((l_opt - 2.3812 / 5.0f64.sqrt()).abs() < 1e-3, "l_opt {l_opt}");
    let acc = rep["predicted_acceptance"].as_f64().unwrap();
    assert!((acc - 0.234).abs() < 1e-3);
    let slow = rep["spherical_slowdown"].as_f64().unwrap();
    assert!((slow - 2.5).abs() < 1e-9);
}

#[test]
fn malformed_config_exits_one_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"kind": "tune", "seed": 1, "target": {"name": "logistic"}, "typo_field": true}"#,
    );
    let out = rwmlab()
        .current_dir(dir.path())
        .args(["tune", "--config"])
        .arg(&cfg)
        .args(["--out", "out"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("typo_field"), "{err}");
    assert!(!dir.path().join("out").exists(), "no outputs on usage error");
}

#[test]
fn kind_mismatch_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sample.json", SAMPLE_CONFIG);
    let out = rwmlab()
        .current_dir(dir.path())
        .args(["tune", "--config"])
        .arg(&cfg)
        .args(["--out", "out"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sample_writes_expected_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sample.json", SAMPLE_CONFIG);
    run_ok(
        rwmlab()
            .current_dir(dir.path())
            .args(["sample", "--config"])
            .arg(&cfg)
            .args(["--out", "out"])
            .output()
            .unwrap(),
    );
    for name in ["manifest.json", "report.json", "paths.csv", "acceptance.csv"] {
        assert!(dir.path().join("out").join(name).exists(), "missing {name}");
    }
    let paths = fs::read_to_string(dir.path().join("out/paths.csv")).unwrap();
    assert!(paths.starts_with("replica,t,coord_1\n"), "csv header");
    let acceptance = fs::read_to_string(dir.path().join("out/acceptance.csv")).unwrap();
    assert!(acceptance.starts_with("l,empirical,se,theory\n"));
    assert_eq!(acceptance.lines().count(), 3); // header + two grid points
}

#[test]
fn identical_runs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sample.json", SAMPLE_CONFIG);
    for (out_name, threads) in [("out1", "1"), ("out8", "8")] {
        run_ok(
            rwmlab()
                .current_dir(dir.path())
                .args(["sample", "--config"])
                .arg(&cfg)
                .args(["--out", out_name, "--threads", threads])
                .output()
                .unwrap(),
        );
    }
    for name in ["report.json", "paths.csv", "acceptance.csv"] {
        let a = fs::read(dir.path().join("out1").join(name)).unwrap();
        let b = fs::read(dir.path().join("out8").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across thread counts");
    }
}

#[test]
fn reproduce_detects_seed_changes_and_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sample.json", SAMPLE_CONFIG);
    run_ok(
        rwmlab()
            .current_dir(dir.path())
            .args(["sample", "--config"])
            .arg(&cfg)
            .args(["--out", "out"])
            .output()
            .unwrap(),
    );
    let manifest_path = dir.path().join("out/manifest.json");

    // clean reproduce passes
    let out = rwmlab()
        .current_dir(dir.path())
        .args(["reproduce", "--manifest"])
        .arg(&manifest_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    // a different seed must produce different artifacts
    let mut manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    manifest["seed"] = serde_json::json!(999u64);
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    let out = rwmlab()
        .current_dir(dir.path())
        .args(["reproduce", "--manifest"])
        .arg(&manifest_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "seed change must be detected");

    // restore the seed, tamper with a CSV instead
    manifest["seed"] = serde_json::json!(424242u64);
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    let csv_path = dir.path().join("out/paths.csv");
    let mut csv = fs::read_to_string(&csv_path).unwrap();
    csv.push_str("999,0,0\n");
    fs::write(&csv_path, csv).unwrap();
    let out = rwmlab()
        .current_dir(dir.path())
        .args(["reproduce", "--manifest"])
        .arg(&manifest_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "tampered artifact must be detected");
    assert!(String::from_utf8_lossy(&out.stdout).contains("paths.csv"));
}

#[test]
fn verify_passes_on_logistic_and_fails_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "verify.json",
        r#"{
          "kind": "verify",
          "seed": 5,
          "target": {"name": "logistic"},
          "n_samples": 20000,
          "output_dir": "out"
        }"#,
    );
    let out = run_ok(
        rwmlab()
            .current_dir(dir.path())
            .args(["verify", "--config"])
            .arg(&cfg)
            .output()
            .unwrap(),
    );
    assert!(out.contains("[PASS]"));
    assert!(!out.contains("[FAIL]"));
    let reports: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert!(reports.as_array().unwrap().len() >= 6);
}

#[test]
fn scan_reports_bounded_gaussian_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scan.json",
        r#"{
          "kind": "scan",
          "seed": 5,
          "target": {"name": "logistic"},
          "scan": {"family": "gaussian-equicorr", "ks": [2, 4, 8], "rho": 0.9},
          "output_dir": "out"
        }"#,
    );
    let out = run_ok(
        rwmlab()
            .current_dir(dir.path())
            .args(["scan", "--config"])
            .arg(&cfg)
            .output()
            .unwrap(),
    );
    assert!(out.contains("Bounded"), "{out}");
}
