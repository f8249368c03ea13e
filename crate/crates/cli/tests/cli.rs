use std::process::{Command, Output};

use serde_json::Value;

fn hilsynth(args: &[&str], cwd: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hilsynth")).args(args).current_dir(cwd).output().unwrap()
}

fn fixture() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/randomization_vs_memory.json").to_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn hoeffding_prints_sample_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = hilsynth(&["hoeffding", "--eps", "0.05", "--delta", "0.01"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "1060");
    let out = hilsynth(&["hoeffding", "--eps", "0.05", "--delta", "0.01", "--efficiency", "4"], dir.path());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "265");
    let out = hilsynth(&["hoeffding", "--eps", "0", "--delta", "0.01"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "invalid_input");
}

#[test]
fn check_on_bundled_fixture_with_even_blue_choice() {
    let dir = tempfile::tempdir().unwrap();
    let out = hilsynth(&["check", "--model", &fixture(), "--uniform", "--threshold", "0.8"], dir.path());
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["prob"].as_f64().unwrap() - 0.833333).abs() < 1e-6);
    assert_eq!(v["verdict"], "SAT");
    assert_eq!(v["states"], 8);
    for key in ["cost", "build_ms", "check_ms"] {
        assert!(v.get(key).is_some(), "{key}");
    }

    let unsat = hilsynth(&["check", "--model", &fixture(), "--uniform", "--threshold", "0.9", "--expect-sat"], dir.path());
    assert_eq!(unsat.status.code(), Some(3));
    let stuck = hilsynth(&["check", "--model", &fixture(), "--uniform", "--max-iterations", "1", "--method", "jacobi"], dir.path());
    assert_eq!(stuck.status.code(), Some(4));
    let err: Value = serde_json::from_slice(&stuck.stderr).unwrap();
    assert!(err["residual"].as_f64().unwrap() > 0.0);
    let missing = hilsynth(&["check", "--model", "no-such-file.json", "--uniform"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn zero_episodes_write_an_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = hilsynth(&["demo", "--episodes", "0", "--out", "log.jsonl"], dir.path());
    assert!(out.status.success());
    assert_eq!(std::fs::read(dir.path().join("log.jsonl")).unwrap(), b"");
}

#[test]
fn pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(hilsynth(&["gen", "--seed", "2", "--count", "2", "--size-max", "6", "--out", "sc"], p).status.success());
    assert!(p.join("sc/scenario-001.json").exists());
    assert!(hilsynth(&["demo", "--seed", "2", "--samples", "100", "--out", "log.jsonl"], p).status.success());
    assert!(hilsynth(&["clone", "--log", "log.jsonl", "--out", "s.json"], p).status.success());
    let check = hilsynth(&["check", "--scenario", "sc/scenario-000.json", "--strategy", "s.json"], p);
    assert!(check.status.success(), "{}", String::from_utf8_lossy(&check.stderr));
    let prob = stdout_json(&check)["prob"].as_f64().unwrap();
    let bound = stdout_json(&hilsynth(&["bound", "--scenario", "sc/scenario-000.json"], p))["bound"].as_f64().unwrap();
    assert!(prob <= bound + 1e-9);
    let heat = hilsynth(&["heatmap", "--scenario", "sc/scenario-000.json", "--strategy", "s.json"], p);
    let csv = String::from_utf8(heat.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,prob"));
    let refine = hilsynth(
        &["refine", "--scenario", "sc/scenario-000.json", "--strategy", "s.json", "--max-iters", "2", "--out-dir", "r"],
        p,
    );
    assert!(refine.status.success(), "{}", String::from_utf8_lossy(&refine.stderr));
    let history = std::fs::read_to_string(p.join("r/history.jsonl")).unwrap();
    let first: Value = serde_json::from_str(history.lines().next().unwrap()).unwrap();
    assert_eq!(first["prob"].as_f64().unwrap(), prob);
}

#[test]
fn bad_flags_exit_with_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hilsynth(&["check", "--uniform"], dir.path()).status.code(), Some(2));
    assert_eq!(hilsynth(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert!(hilsynth(&["--help"], dir.path()).status.success());
}
