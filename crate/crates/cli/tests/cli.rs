use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sottovoce"))
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn validate_reports_a_summary() {
    let out = run(&["validate", "builtin:sample"]);
    assert!(out.status.success());
    let summary: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["walls"], 12);
    assert_eq!(summary["targets"], 51);
    assert_eq!(summary["checksum"].as_str().unwrap().len(), 64);
}

#[test]
fn invalid_catalog_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut doc: Value = serde_json::from_str(include_str!("../../../scenarios/two_clips.json")).unwrap();
    doc["clips"][0]["duration_ms"] = Value::from(0);
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("clips[0].duration_ms"));
    assert_eq!(run(&["validate", "/nonexistent/catalog.json"]).status.code(), Some(1));
}

#[test]
fn run_writes_timeline_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("timeline.jsonl");
    let scenario = scenarios().join("two_tap.json");
    let out = run(&["run", scenario.to_str().unwrap(), "--out", out_path.to_str().unwrap(), "--stats"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(stats["mutual_eavesdrop_fraction"], 1.0);
    assert_eq!(stats["simultaneous_listening_ms"], 21_000);

    let lines: Vec<Value> = std::fs::read_to_string(&out_path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 8);
    let handover = lines.iter().find(|l| l["t_ms"] == 10_000 && l["device"] == "A").unwrap();
    assert_eq!(handover["state"]["source"], "eavesdropped");
    assert_eq!(handover["state"]["position_ms"], 8000);
}

#[test]
fn run_rejects_bad_scenarios_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(scenarios().join("two_clips.json"), dir.path().join("two_clips.json")).unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, r#"{"catalog_ref":"two_clips.json","events":[{"at_ms":5,"device":"A","action":{"kind":"tap","wall_id":"w","x":900,"y":1}}],"end_ms":10}"#).unwrap();
    assert_eq!(run(&["run", path.to_str().unwrap()]).status.code(), Some(1));
    std::fs::write(&path, "{").unwrap();
    assert_eq!(run(&["oracle-check", path.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn oracle_check_on_shipped_scenarios() {
    for name in ["two_tap.json", "lossy_tour.json", "openair_tour.json"] {
        let path = scenarios().join(name);
        let out = run(&["oracle-check", path.to_str().unwrap(), "--step-ms", "5"]);
        assert!(out.status.success(), "{name}: {}", stdout(&out));
        let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(report["agrees"], true);
        assert!(report["max_change_offset_ms"].as_i64().unwrap() < 5);
    }
}

#[test]
fn fuzz_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "fuzz",
        "--runs",
        "200",
        "--seed",
        "9",
        "--max-loss",
        "0.25",
        "--oracle-step-ms",
        "10",
        "--repro-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["runs"], 200);
    assert_eq!(report["violations"], 0);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn serve_rejects_bad_settings() {
    let out = run(&["serve", "--port", "0", "--delay-min-ms", "50", "--delay-max-ms", "10"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["serve", "--port", "0", "--catalog", "/nonexistent.json"]);
    assert_eq!(out.status.code(), Some(1));
}
