use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn concentration(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concentration")).args(args).output().unwrap()
}

fn write_envelope(dir: &Path, name: &str, spec: Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec(&json!({"schema": 1, "spec": spec})).unwrap()).unwrap();
    path
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn norms_of_unit_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_envelope(dir.path(), "exp.json", json!({"kind": "Exponential", "rate": 1.0}));
    let out = concentration(&["norms", "--spec", spec.to_str().unwrap(), "--alpha", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["command"], "norms");
    assert!((v["result"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn override_rescales_the_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_envelope(dir.path(), "exp.json", json!({"kind": "Exponential", "rate": 1.0}));
    let out = concentration(&["norms", "--spec", spec.to_str().unwrap(), "--set", "rate=4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((stdout_json(&out)["result"]["value"].as_f64().unwrap() - 0.25).abs() < 1e-6);
    let out = concentration(&["norms", "--spec", spec.to_str().unwrap(), "--set", "nope.deeper=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn usage_errors_exit_one_with_a_location() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(concentration(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(concentration(&["--help"]).status.code(), Some(0));

    let typo = write_envelope(dir.path(), "typo.json", json!({"kind": "Sum", "components": [{"kind": "Exponential", "rat": 1.0}]}));
    let out = concentration(&["bound", "--spec", typo.to_str().unwrap(), "--t-grid", "0.1:1:3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("components[0]"), "{err}");

    let path = dir.path().join("schema.json");
    std::fs::write(&path, r#"{"schema": 7, "spec": {"kind": "Rademacher"}}"#).unwrap();
    let out = concentration(&["norms", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));

    let out = concentration(&["appbound", "vector-iii", "--l2p", "1", "--psi1", "1", "--p", "2", "--n", "10", "--delta", "0.7"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta <= 1/2"));
}

#[test]
fn appbound_reports_value() {
    let out = concentration(&["appbound", "vector-ii", "--psi1", "1", "--n", "100", "--delta", "0.01"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let want = 8.0 * std::f64::consts::E * (2.0 * 100f64.ln() / 100.0).sqrt();
    assert!((v["value"].as_f64().unwrap() - want).abs() < 1e-12, "{v}");
}

#[test]
fn halved_bound_on_a_single_sign_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_envelope(dir.path(), "sign.json", json!({"kind": "Sum", "components": [{"kind": "Rademacher"}]}));
    let out = concentration(&[
        "verify", "--spec", spec.to_str().unwrap(), "--t-grid", "0.5:0.9:5", "--n", "1000000", "--negative-control", "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().skip(2).all(|l| l.ends_with("VIOLATION")), "{text}");
}

#[test]
fn entropy_check_on_a_finite_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_envelope(
        dir.path(),
        "finite.json",
        json!({"kind": "finite", "dist": {"values": [-1.0, 0.0, 2.0], "probs": [0.3, 0.5, 0.2]}, "betas": [0.5, 1.0], "holder_p": 2.0}),
    );
    let out = concentration(&["entropy-check", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["result"]["verdict"], "SOUND");
}

#[test]
fn verify_csv_layout_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_envelope(dir.path(), "sum.json", json!({"kind": "Sum", "components": [{"kind": "Rademacher"}, {"kind": "Rademacher"}]}));
    let out_path = dir.path().join("report.csv");
    let out = concentration(&[
        "verify", "--spec", spec.to_str().unwrap(), "--t-grid", "0.5:1.5:3", "--n", "10000", "--seed", "5",
        "--bounds", "thm2,bounded-difference", "--format", "csv", "--output", out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# concentration ") && lines[0].ends_with(" seed=5"), "{}", lines[0]);
    assert_eq!(lines[1], "t,empirical,cp_lo,cp_hi,thm2,bounded-difference,verdict");
    assert_eq!(lines.len(), 5);
    // sum of two signs exceeds its mean by more than 0.5 only at 2, with probability 1/4
    let row: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(row[0], "0.5");
    let emp: f64 = row[1].parse().unwrap();
    assert!((emp - 0.25).abs() < 0.02);
    assert_eq!(row[6], "SOUND");
    let bd: f64 = row[5].parse().unwrap();
    assert!((bd - (-0.25f64 / 4.0).exp()).abs() < 1e-15);
}

#[test]
fn compare_writes_log_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_envelope(dir.path(), "sum.json", json!({"kind": "Sum", "components": vec![json!({"kind": "Exponential", "rate": 1.0}); 3]}));
    let out = concentration(&[
        "compare", "--spec", spec.to_str().unwrap(), "--t-grid", "0.5:2:4", "--n", "20000", "--bounds", "thm2,thm3", "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().nth(1), Some("t,empirical,cp_lo,cp_hi,ln_ratio_thm2,ln_ratio_thm3"));
}

#[test]
fn verify_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_envelope(
        dir.path(),
        "vec.json",
        json!({"kind": "VectorNormOfSum", "vec": {"dim": 3, "components": vec![json!({"kind": "Gaussian", "mean": 0.0, "sd": 1.0}); 3]}, "n": 4}),
    );
    let run = |threads: &str| {
        let out = concentration(&[
            "verify", "--spec", spec.to_str().unwrap(), "--t-grid", "0.5:4:8", "--n", "50000", "--seed", "77", "--threads", threads,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    assert_eq!(run("1"), run("3"));
}
