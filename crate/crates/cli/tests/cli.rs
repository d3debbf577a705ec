use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pegreserve"))
}

#[test]
fn oracle_passes() {
    let out = bin().args(["oracle", "--seed", "3"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn small_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"horizon_days": 10, "replicas": 3}"#).unwrap();
    let out = bin()
        .env("PEGRESERVE_WORKERS", "2")
        .args(["run", "--config"])
        .arg(&config)
        .args(["--scenario", "false_alarm", "--policy", "max_liquidity", "--replicas", "2", "--seed", "9", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.csv", "replicas.csv", "manifest.json", "trajectory_false_alarm_max_liquidity.csv"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let replicas = fs::read_to_string(out_dir.join("replicas.csv")).unwrap();
    assert_eq!(replicas.lines().count(), 3);
    let traj = fs::read_to_string(out_dir.join("trajectory_false_alarm_max_liquidity.csv")).unwrap();
    // 30 windows per replica plus the header
    assert_eq!(traj.lines().count(), 61);
    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"master_seed\": 9"));
}

#[test]
fn unknown_scenario_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--scenario", "meteor", "--replicas", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("meteor"));
}

#[test]
fn bad_worker_count_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("PEGRESERVE_WORKERS", "0")
        .args(["run", "--policy", "max_liquidity", "--replicas", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"replica": 3}"#).unwrap();
    let out = bin().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
