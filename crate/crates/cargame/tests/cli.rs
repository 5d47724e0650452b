use std::path::Path;
use std::process::{Command, Output};

use cargame_core::course::{self, Course};
use serde_json::Value;

fn cargame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cargame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_codes() {
    assert_eq!(code(&cargame(&["--help"])), 0);
    assert_eq!(code(&cargame(&["--version"])), 0);
    assert_eq!(code(&cargame(&[])), 2);
    assert_eq!(code(&cargame(&["sim", "--battery", "nicad"])), 2);
    assert_eq!(code(&cargame(&["sim", "--headless", "--serve"])), 2);
    assert_eq!(code(&cargame(&["replay"])), 2);
    assert_eq!(code(&cargame(&["conformance"])), 2);
    assert_eq!(code(&cargame(&["sim", "--headless", "--tick", "80"])), 2);
    assert_eq!(code(&cargame(&["sim", "--headless", "--script", "0:q"])), 2);
}

#[test]
fn validate_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, course::save(&Course::default()).unwrap()).unwrap();
    let o = cargame(&["validate", "--course", path(&good)]);
    assert_eq!(code(&o), 0);

    let mut doc = course::to_value(&Course::default());
    doc["obstacles"] =
        serde_json::json!([{"id": 2, "kind": "tree", "x": 0.5, "y": 1.5, "radius": 0.1}]);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, doc.to_string()).unwrap();
    let o = cargame(&["validate", "--course", path(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("start overlaps obstacle 2"));

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{").unwrap();
    assert_eq!(code(&cargame(&["validate", "--course", path(&junk)])), 1);
    assert_eq!(
        code(&cargame(&["validate", "--course", "/no/such/course.json"])),
        1
    );
}

#[test]
fn headless_record_replay_verify() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.json");
    let o = cargame(&[
        "sim",
        "--headless",
        "--duration",
        "3",
        "--surface",
        "rough",
        "--layout",
        "caster",
        "--link-latency",
        "40",
        "--link-jitter",
        "15",
        "--drop",
        "0.1",
        "--seed",
        "11",
        "--script",
        "0:w,1200:a,2000:h",
        "--record",
        path(&log),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<Value> = stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["type"], "CommandAccepted");
    let summary = lines.last().unwrap();
    assert_eq!(summary["type"], "summary");
    assert_eq!(summary["t"], 3.0);

    let o = cargame(&["replay", "--log", path(&log), "--verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["trace_hash"], summary["trace_hash"]);
    assert_eq!(report["ticks"], 300);

    // Shift the turn by a tick and the replay must say where it split.
    let mut v: Value = serde_json::from_slice(&std::fs::read(&log).unwrap()).unwrap();
    v["entries"][1]["t_ms"] = Value::from(1210);
    std::fs::write(&log, v.to_string()).unwrap();
    let o = cargame(&["replay", "--log", path(&log), "--verify"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged at tick"));
    // Without --verify the replay itself still succeeds.
    assert_eq!(code(&cargame(&["replay", "--log", path(&log)])), 0);

    std::fs::write(&log, "{\"format\":\"cargame-runlog\"}").unwrap();
    assert_eq!(
        code(&cargame(&["replay", "--log", path(&log), "--verify"])),
        1
    );
}

#[test]
fn sim_with_course_file() {
    let dir = tempfile::tempdir().unwrap();
    let (c, _) = course::author_add(
        &Course::default(),
        course::ObstacleKind::Stone,
        1.0,
        1.5,
        0.1,
    )
    .unwrap();
    let file = dir.path().join("c.json");
    std::fs::write(&file, course::save(&c).unwrap()).unwrap();
    let o = cargame(&[
        "sim",
        "--headless",
        "--duration",
        "3",
        "--course",
        path(&file),
        "--script",
        "0:w",
    ]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.contains("\"Collision\"")));
    let summary: Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    assert_eq!(summary["collisions"], 1);
}

#[test]
fn conformance_against_emulator() {
    let o = cargame(&["conformance", "--emulated"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6);
    let o = cargame(&[
        "conformance",
        "--port",
        "/dev/no-such-cargame-port",
        "--boot-wait",
        "0",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn served_run_records_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("served.json");
    let o = cargame(&[
        "sim",
        "--serve",
        "127.0.0.1:0",
        "--duration",
        "0.5",
        "--record",
        path(&log),
        "--courses",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("serving on ws://127.0.0.1:"));
    let o = cargame(&["replay", "--log", path(&log), "--verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn script_needs_headless() {
    assert_eq!(
        code(&cargame(&["sim", "--script", "0:w", "--duration", "0.1"])),
        2
    );
}
