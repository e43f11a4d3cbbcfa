use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_renormkit"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("pass ")).count(), 8);
}

#[test]
fn usage_errors_exit_one() {
    let out = bin().args(["pipeline", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
    assert_eq!(bin().arg("pipeline").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(1));
    let bad = bin()
        .args(["pipeline", "--config", config("golden_recovery.json").to_str().unwrap(), "--depth", "0"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn failed_diagnostics_exit_two() {
    // the recovery map is not circle-smooth, so its potential picks up a jump
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("golden_recovery.json");
    let out = run(&["pipeline", "--config", cfg.to_str().unwrap(), "--mode", "circle"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    // partial reports are still written
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn pipeline_writes_reports_with_decreasing_dc1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("golden_circle_pair.json");
    let out = run(&["pipeline", "--config", cfg.to_str().unwrap(), "--seed", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(dir.path().join("series_0.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "dC1").unwrap();
    let dc1: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(dc1.len(), 13);
    assert!(dc1.windows(2).all(|w| w[1] < w[0]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert!(report["tolerances"]["conj_residual"].is_number());
    assert_eq!(report["passed"], true);
}

#[test]
fn stage_commands_report_their_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("golden_recovery.json");
    for stage in ["shadow", "model", "conjugate"] {
        let out = run(&[stage, "--config", cfg.to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(0), "{stage}");
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{stage}.json"))).unwrap()).unwrap();
        assert_eq!(v["passed"], true);
        assert!(!v["checks"].as_object().unwrap().is_empty());
    }
}

#[test]
fn induced_path_feeds_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("golden_recovery.json");
    let out = run(&["induce", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let windows = std::fs::read_to_string(dir.path().join("windows.jsonl")).unwrap();
    for line in windows.lines() {
        let w: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(w["end"].as_u64() > w["start"].as_u64());
    }
    let split = run(&["split", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(split.status.code(), Some(0));
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    v["reference"] = serde_json::json!({"kind": "file", "path": "path.json"});
    v["depth"] = serde_json::json!(12);
    let derived = dir.path().join("from_file.json");
    std::fs::write(&derived, v.to_string()).unwrap();
    let out = run(&["pipeline", "--config", derived.to_str().unwrap()], &dir.path().join("run"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
