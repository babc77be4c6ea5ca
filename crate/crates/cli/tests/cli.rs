use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hisparse"))
}

#[test]
fn recovery_grid_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"M": [4], "N": 5, "m": 6, "block_lengths": 8, "s_values": [1, 2], "sigma_values": [1], "trials": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .args(["recovery-grid", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "7", "--threads", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("trials.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,s,sigma,M,N,m,snr_db,mode,trial,seed,mse,success,detection_rate,iterations,wall_millis"
    );
    assert_eq!(lines.count(), 6);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["config"]["master_seed"], 7);
    assert_eq!(summary["cells"].as_array().unwrap().len(), 2);

    // same config, same bytes
    let again = dir.path().join("again");
    assert!(bin()
        .args(["recovery-grid", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&again)
        .args(["--seed", "7"])
        .status()
        .unwrap()
        .success());
    assert_eq!(csv, fs::read_to_string(again.join("trials.csv")).unwrap());
}

#[test]
fn theorem_verify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"theorem": {"instances": 5}}"#).unwrap();
    let status = bin()
        .args(["theorem-verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["instances_checked"], 5);
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"trials": 0}"#).unwrap();
    let status = bin()
        .args(["block-detection", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!dir.path().join("trials.csv").exists());
}
