//! End-to-end CLI tests: output schemas, exit codes, round trips.

use std::process::{Command, Output};

fn afarey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afarey"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn theta_digits() {
    let out = afarey(&["theta", "-p", "harmonic", "-d", "[2,3]"]);
    let v = stdout_json(&out);
    assert_eq!(v["result"]["value"], 0.4375);
    assert_eq!(v["result"]["error_bound"], 0.0);
    assert_eq!(v["config"]["partition"], "harmonic");
}

#[test]
fn theta_point_matches_digits() {
    let by_digits = stdout_json(&afarey(&["theta", "-p", "harmonic", "-d", "[2,3]"]));
    let by_point = stdout_json(&afarey(&["theta", "-p", "harmonic", "-x", "4/9"]));
    assert_eq!(by_digits["result"]["value"], by_point["result"]["value"]);
}

#[test]
fn value_then_expand_round_trip() {
    let v = stdout_json(&afarey(&["value", "-p", "harmonic", "-d", "[2,3]"]));
    assert_eq!(v["result"]["exact"], "4/9");
    let e = stdout_json(&afarey(&["expand", "-p", "harmonic", "-x", "4/9"]));
    assert_eq!(e["result"]["digits"], "[2,3]");
    assert_eq!(e["result"]["kind"], "finite");
}

#[test]
fn dims_values() {
    let v = stdout_json(&afarey(&["dims", "-p", "geometric:3"]));
    let sigma = v["result"]["dim_theta_inf"].as_f64().unwrap();
    assert!((sigma - 0.9791).abs() < 1e-3, "sigma = {sigma}");
    assert_eq!(v["result"]["dim_theta_0"], 1.0);
}

#[test]
fn exit_code_hypothesis_violation() {
    let out = afarey(&["classify", "-p", "dyadic", "-d", "[2 per]"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("identity"), "stderr: {err}");

    let out = afarey(&["spectrum", "-p", "geometric:3", "--s", "5.0"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("outside admissible range"), "stderr: {err}");
}

#[test]
fn exit_code_input_errors() {
    // unknown flags are errors, not warnings
    let out = afarey(&["theta", "--nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    // malformed digit string
    let out = afarey(&["theta", "-p", "harmonic", "-d", "2,3"]);
    assert_eq!(out.status.code(), Some(2));
    // malformed partition
    let out = afarey(&["theta", "-p", "geometric:0.5", "-d", "[2]"]);
    assert_eq!(out.status.code(), Some(2));
    // csv unsupported for scalar commands
    let out = afarey(&["theta", "-p", "harmonic", "-d", "[2]", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bits_toggle() {
    let nats = stdout_json(&afarey(&["lyapunov", "-p", "harmonic", "-d", "[(2)]"]));
    let bits = stdout_json(&afarey(&["lyapunov", "-p", "harmonic", "-d", "[(2)]", "--bits"]));
    let e_nats = nats["result"]["estimate"].as_f64().unwrap();
    let e_bits = bits["result"]["estimate"].as_f64().unwrap();
    assert!((e_nats - 6.0f64.ln() / 2.0).abs() < 1e-12);
    assert!((e_bits - e_nats / std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn spectrum_csv() {
    let out = afarey(&["spectrum", "-p", "geometric:3", "--grid", "0.5:1.0:5", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("s,u_star,v,sigma\n"), "{text}");
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn census_default_entries() {
    let v = stdout_json(&afarey(&["experiment", "census", "-p", "harmonic"]));
    assert_eq!(v["result"]["pass"], true);
    let verdicts: Vec<&str> = v["result"]["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["verdict"].as_str().unwrap())
        .collect();
    assert_eq!(verdicts, vec!["infinity", "zero", "not_exist", "not_exist"]);
}

#[test]
fn experiment_files_written() {
    let dir = std::env::temp_dir().join(format!("afarey-test-{}", std::process::id()));
    let out = afarey(&[
        "experiment",
        "singularity",
        "-p",
        "geometric:3",
        "--samples",
        "20",
        "--levels",
        "200",
        "--margin",
        "0.02",
        "--required-fraction",
        "0.5",
        "--seed",
        "7",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["result"]["seed"], 7);
    let json_path = dir.join("singularity_geometric-3_7.json");
    let csv_path = dir.join("singularity_geometric-3_7.csv");
    assert!(json_path.exists(), "missing {json_path:?}");
    assert!(csv_path.exists(), "missing {csv_path:?}");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("index,level,drift,below_margin\n"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn custom_partition_file() {
    let dir = std::env::temp_dir().join(format!("afarey-custom-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("part.json");
    std::fs::write(
        &path,
        r#"{"tails": [1.0, 0.4, 0.1], "tail_model": {"kind": "geometric", "param": 2.0}}"#,
    )
    .unwrap();
    let spec = format!("custom:{}", path.display());
    let v = stdout_json(&afarey(&["partition", "info", "-p", &spec]));
    assert_eq!(v["result"]["classification"]["class"], "expanding");
    assert_eq!(v["result"]["classification"]["rho"], 2.0);
    // bad custom file: non-monotone tail names the first bad index
    std::fs::write(
        &path,
        r#"{"tails": [1.0, 0.5, 0.6], "tail_model": {"kind": "geometric", "param": 2.0}}"#,
    )
    .unwrap();
    let out = afarey(&["partition", "info", "-p", &spec]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("index 3"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_conjugacy_residual() {
    let v = stdout_json(&afarey(&[
        "verify-conjugacy",
        "-p",
        "geometric:3",
        "-d",
        "[1,2;(3,1,2)]",
        "--steps",
        "15",
    ]));
    let r = v["result"]["max_residual"].as_f64().unwrap();
    assert!(r <= 1e-9, "residual {r}");
}
