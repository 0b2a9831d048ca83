use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn psro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psro")).args(args).output().unwrap()
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn run_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kuhn");
    let o = psro(&["run", "--game", "kuhn", "--variant", "psro", "--iters", "20", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lines(&out.join("metrics.csv")), 21);
    assert!(out.join("config.json").exists() && out.join("meta.txt").exists());

    let o = psro(&["eval", "--run", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lines(&out.join("eval.csv")), 21);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"game": "rps", "variant": "psd-psro", "iterations": 3, "oracle": {"steps": 20}}"#).unwrap();
    let out = dir.path().join("rps");
    let o = psro(&["run", "--config", cfg.to_str().unwrap(), "--iters", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lines(&out.join("metrics.csv")), 3);
    let written: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(written["oracle"]["mode"], "exact-gradient");
    assert_eq!(written["oracle"]["lambda"], 0.85);
    assert_eq!(written["oracle"]["steps"], 20);
}

#[test]
fn corrupted_policy_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kuhn");
    assert!(psro(&["run", "--game", "kuhn", "--iters", "3", "--out", out.to_str().unwrap()]).status.success());
    fs::write(out.join("policies").join("p1_0002.txt"), "garbage").unwrap();
    let o = psro(&["eval", "--run", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p1_0002.txt"));
}

#[test]
fn counterexample_is_reproduced() {
    let o = psro(&["counterexample"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("difference -0.066667") && text.contains("difference -1.833333"), "{text}");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(psro(&["run", "--game", "chess"]).status.code(), Some(1));
    assert_eq!(psro(&["run", "--variant", "psro", "--lambda", "0.3"]).status.code(), Some(1));
    assert_eq!(psro(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(psro(&["--help"]).status.code(), Some(0));
}

#[test]
fn games_and_distance() {
    let o = psro(&["games"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("kuhn"));

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.txt");
    let q = dir.path().join("q.txt");
    let out = dir.path().join("run");
    assert!(psro(&["run", "--game", "kuhn", "--iters", "2", "--out", out.to_str().unwrap()]).status.success());
    fs::copy(out.join("policies/p1_0000.txt"), &p).unwrap();
    fs::copy(out.join("policies/p1_0001.txt"), &q).unwrap();
    let o = psro(&["distance", "--game", "kuhn", "--policy", p.to_str().unwrap(), "--reference", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("distance 0.000000000000"));
    // a pure reference gives infinite divergence unless floored
    let o = psro(&["distance", "--game", "kuhn", "--policy", p.to_str().unwrap(), "--reference", q.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = psro(&[
        "distance", "--game", "kuhn", "--policy", p.to_str().unwrap(), "--reference", q.to_str().unwrap(),
        "--reference-floor", "0.01", "--trajectories", "1000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
