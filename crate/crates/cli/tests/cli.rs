use std::path::Path;
use std::process::{Command, Output};

fn scenedet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenedet")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(scenedet(&[]).status.code(), Some(1));
    assert_eq!(scenedet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(scenedet(&["learn", "--video", "x"]).status.code(), Some(1));
    assert_eq!(scenedet(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let out = scenedet(&["learn", "--video", arg(&missing), "--negatives", arg(&missing), "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = scenedet(&["synth", "--out", arg(dir.path()), "--frames", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(scenedet(&["synth", "--out", arg(&data), "--frames", "20", "--negatives", "5"]).status.success());
    let out = scenedet(&[
        "learn",
        "--video",
        arg(&data.join("video")),
        "--negatives",
        arg(&data.join("negatives")),
        "--out",
        arg(&dir.path().join("run")),
        "--set",
        "no_such_key=1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_learn_detect_eval_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    let det = dir.path().join("det");
    let ev = dir.path().join("eval");

    let out = scenedet(&["synth", "--out", arg(&data), "--frames", "60", "--negatives", "6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["video/000000.pgm", "negatives/000000.pgm", "gt.jsonl", "synth.json"] {
        assert!(data.join(f).exists(), "{f}");
    }

    let out = scenedet(&[
        "learn",
        "--video",
        arg(&data.join("video")),
        "--negatives",
        arg(&data.join("negatives")),
        "--out",
        arg(&run),
        "--end",
        "40",
        "--max-iterations",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.json", "labels.jsonl", "log.jsonl", "config.json"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let out = scenedet(&[
        "detect",
        "--model",
        arg(&run.join("model.json")),
        "--frames",
        arg(&data.join("video")),
        "--out",
        arg(&det),
        "--start",
        "40",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = scenedet(&[
        "eval",
        "--detections",
        arg(&det.join("detections.jsonl")),
        "--gt",
        arg(&data.join("gt.jsonl")),
        "--out",
        arg(&ev),
        "--start",
        "40",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ev.join("summary.json")).unwrap()).unwrap();
    let ap = summary["ap"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ap));
    assert_eq!(summary["frames"].as_u64(), Some(20));
    assert!(std::fs::read_to_string(ev.join("curve.csv")).unwrap().starts_with("threshold,precision,recall,fppi"));

    let out = scenedet(&["report", "--log", arg(&run.join("log.jsonl")), "--out", arg(&dir.path().join("report.csv"))]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("xi"));
}
