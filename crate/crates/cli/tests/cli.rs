use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn spinepatch(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinepatch"))
        .current_dir(cwd)
        .args(args)
        .env_remove("SPINEPATCH_LOG")
        .output()
        .expect("spawn spinepatch")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn synth_segpatch_train_happy_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    let out = spinepatch(cwd, &["synth", "--seed", "7", "--n-scans", "40", "--out-dir", "d"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["scans"], 40);

    let out = spinepatch(cwd, &["segpatch", "--manifest", "d/manifest.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(cwd.join("d/segpatch/present").is_dir());

    // relative paths resolve against the working directory
    let out = spinepatch(&cwd.join("d"), &["train", "--method", "segpatch"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = stdout_json(&out);
    assert_eq!(metrics["method"], "segpatch");
    assert!(metrics["test"]["accuracy"].as_f64().unwrap() > 0.5);
    assert!(cwd.join("d/models/segpatch.model").is_file());
    assert!(cwd.join("d/metrics/segpatch.json").is_file());
    assert!(!out.stderr.is_empty(), "logs belong on stderr");
}

#[test]
fn zero_tile_width_is_a_flag_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinepatch(tmp.path(), &["tile", "--tile-w", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--tile-w"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn eval_before_train_reports_missing_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinepatch(tmp.path(), &["eval"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model file not found"));
}

#[test]
fn unknown_flag_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinepatch(tmp.path(), &["stats", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_manifest_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinepatch(tmp.path(), &["stats", "--manifest", "nowhere/manifest.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_manifest_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("manifest.json"), "{\"version\": 1,").unwrap();
    let out = spinepatch(tmp.path(), &["stats"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.json:"));
}

#[test]
fn compare_without_metrics_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    let out = spinepatch(cwd, &["synth", "--n-scans", "4", "--out-dir", "d", "--log-level", "error"]);
    assert_eq!(out.status.code(), Some(0));
    let out = spinepatch(cwd, &["compare", "--out-dir", "d"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing metrics for tiling"));
}

#[test]
fn patchers_split_and_reports_are_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    let run = |args: &[&str]| {
        let out = spinepatch(cwd, args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    run(&["synth", "--seed", "3", "--n-scans", "6", "--out-dir", "d"]);
    let steps: [&[&str]; 5] = [
        &["tile", "--out-dir", "d"],
        &["segpatch", "--out-dir", "d", "--expansion-scale", "0.5"],
        &["split", "--out-dir", "d", "--seed", "3"],
        &["stats", "--out-dir", "d"],
        &["coverage", "--out-dir", "d"],
    ];
    let mut first = Vec::new();
    for s in steps {
        first.push(run(s));
    }
    let manifest = std::fs::read(cwd.join("d/manifest.json")).unwrap();
    for (s, expected) in steps.iter().zip(&first) {
        assert_eq!(&run(s), expected, "{s:?}");
    }
    assert_eq!(std::fs::read(cwd.join("d/manifest.json")).unwrap(), manifest);

    let out = spinepatch(cwd, &["overlay", "--out-dir", "d", "--method", "segpatch"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["overlays"].as_array().unwrap().len(), 6);
}

#[test]
fn log_level_env_override() {
    let tmp = tempfile::tempdir().unwrap();
    let quiet = Command::new(env!("CARGO_BIN_EXE_spinepatch"))
        .current_dir(tmp.path())
        .args(["synth", "--n-scans", "4", "--out-dir", "d", "--log-level", "info"])
        .env("SPINEPATCH_LOG", "error")
        .output()
        .unwrap();
    assert_eq!(quiet.status.code(), Some(0));
    assert!(quiet.stderr.is_empty(), "{}", String::from_utf8_lossy(&quiet.stderr));
}
