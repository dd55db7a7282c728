use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn spyfall(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spyfall"))
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_fixture_prints_outcome() {
    let path = fixtures().join("ena5005.json");
    let o = spyfall(&["run", "--fixtures", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "spy wins, 3 turns\n");
}

#[test]
fn replay_shipped_fixtures() {
    let o = spyfall(&["replay", "--fixtures", fixtures().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).ends_with("8 of 8 games reproduced\n"));
}

#[test]
fn replay_divergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixtures().join("ena5005.json")).unwrap();
    let tampered = text.replace("\"spywin\": true", "\"spywin\": false");
    assert_ne!(text, tampered);
    std::fs::write(dir.path().join("ena5005.json"), tampered).unwrap();
    let o = spyfall(&["replay", "--fixtures", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stdout(&o).contains("ena5005: spywin differs"));
}

#[test]
fn guard_exit_codes() {
    assert_eq!(spyfall(&["run", "--location", "moonbase"]).status.code(), Some(2));
    assert_eq!(spyfall(&["run", "--location", "bank"]).status.code(), Some(3));
}

#[test]
fn baseline_estimate() {
    let o = spyfall(&["baseline", "--n", "100000", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0));
    let est: f64 = stdout(&o).split_whitespace().next().unwrap().parse().unwrap();
    assert!((est - 0.2).abs() < 0.01, "{est}");
}

#[test]
fn classify_figure_trio() {
    let dir = tempfile::tempdir().unwrap();
    let all: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("exp1/error_quotes.json")).unwrap()).unwrap();
    let trio: Vec<_> = all
        .into_iter()
        .filter(|r| r["id"].as_str().unwrap().starts_with("figure1-"))
        .collect();
    let path = dir.path().join("trio.json");
    std::fs::write(&path, serde_json::to_string(&trio).unwrap()).unwrap();
    let o = spyfall(&["classify", "--corpus", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<_> = stdout(&o)
        .lines()
        .filter(|l| l.starts_with("figure1-"))
        .map(String::from)
        .collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains("UsableSuperfluous"));
}

#[test]
fn baseline_batch_writes_manifest_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "agent = baseline\nconcurrency = 2\n").unwrap();
    let out = dir.path().join("out");
    let o = spyfall(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
        "batch",
        "--n",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["games"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["script_checksums"].as_object().unwrap().len(), 10);
    let o = spyfall(&["replay", "--fixtures", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
