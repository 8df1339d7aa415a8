use std::process::Command;

fn modshift() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modshift"))
}

#[test]
fn fim_report_mean_d3() {
    let out = modshift()
        .args(["fim-report", "--scheme", "mean", "--d", "3", "--h", "1", "--sigma", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let closed: Vec<f64> = serde_json::from_value(json["closed_form"].clone()).unwrap();
    assert_eq!(closed.len(), 3);
    for (got, want) in closed.iter().zip([0.0, 2.0, 2.0]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(json["singular"], true);
}

#[test]
fn fim_report_custom_gamma() {
    let out = modshift()
        .args(["fim-report", "--scheme", "custom", "--d", "2", "--gamma", "-2,1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn scheme_with_baseline_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"scheme": "max", "baseline.kind": "gaussian", "baseline.beta_sq": 1.0}"#).unwrap();
    let out = modshift()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("t.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"dimension": 3}"#).unwrap();
    let out = modshift().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_one_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"d": 4, "K": 3, "m_k": 30, "N": 7, "eta": 0.02, "scheme": "mean"}"#,
    )
    .unwrap();
    let trace = dir.path().join("trace.csv");
    let summary = dir.path().join("summary.json");
    let status = modshift()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&trace)
        .arg("--summary")
        .arg(&summary)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("round,loss_bob,loss_eve"));
    assert_eq!(lines.count(), 7);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(json["ledger_total"], 21);
}

#[test]
fn validate_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"d": 5, "K": 2, "m_k": 20, "scheme": "comp"}"#).unwrap();
    let out = modshift().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["checks"].as_array().unwrap().len() >= 5);
}
