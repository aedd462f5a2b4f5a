use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn csflock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csflock"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const PAIR: &str = r#"{
    "kernel": {"kind": "singular", "alpha": 0.5},
    "n": 2, "dim": 1, "t_final": 2.0,
    "initial": {"scenario": "critical-pair"}
}"#;

#[test]
fn simulate_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PAIR);
    let run = dir.path().join("run");
    let out = csflock(&["simulate", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_stdout(&out);
    assert_eq!(doc["sticking"], 1);
    for f in ["trajectory.csv", "events.jsonl", "diagnostics.csv", "report.json", "summary.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }

    let out = csflock(&["verify", "--run", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_stdout(&out);
    let checks = report["checks"].as_array().unwrap();
    for name in ["reproduces_trajectory", "reproduces_events", "two_body_sticking_time"] {
        let c = checks.iter().find(|c| c["name"] == name).expect(name);
        assert_eq!(c["passed"], true, "{c}");
    }
}

#[test]
fn verify_notices_a_tampered_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PAIR);
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    assert_eq!(csflock(&["simulate", "--config", &cfg, "--out", run_s]).status.code(), Some(0));
    let p = run.join("trajectory.csv");
    let text = std::fs::read_to_string(&p).unwrap().replacen("0.0,-0.5,0.5", "0.0,-0.5,0.50001", 1);
    std::fs::write(&p, text).unwrap();
    assert_eq!(csflock(&["verify", "--run", run_s]).status.code(), Some(1));
}

#[test]
fn overrides_take_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PAIR);
    let run = dir.path().join("run");
    let out = csflock(&[
        "simulate", "--config", &cfg, "--out", run.to_str().unwrap(), "--t-final", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["t_final"], 0.5);
    assert_eq!(summary["events"]["sticking"], 0);
}

#[test]
fn oracle_classifies() {
    let out = csflock(&["oracle", "--alpha", "0.5", "--w0", "1", "--u0", "-2"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    assert_eq!(doc["outcome"]["class"], "exact-sticking");
    assert!((doc["outcome"]["t_event"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let out = csflock(&["oracle", "--alpha", "0.5", "--w0", "1", "--u0", "-3", "--t", "10"]);
    let doc = json_stdout(&out);
    assert_eq!(doc["outcome"]["class"], "crossing");
    assert_eq!(doc["outcome"]["impact_speed"], 1.0);
    assert!((doc["state"]["w"].as_f64().unwrap() + 0.25).abs() < 1e-8);
}

#[test]
fn oracle_rejects_alpha_outside_range() {
    let out = csflock(&["oracle", "--alpha", "1.5", "--w0", "1", "--u0", "-2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn demo_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = csflock(&["demo", "--name", "critical-pair", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    assert_eq!(doc["events"].as_array().unwrap().len(), 1);
    assert_eq!(doc["events"][0]["kind"], "sticking");
    let events = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 1);
}

#[test]
fn backward_demo_writes_both_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = csflock(&[
        "demo", "--name", "backward-nonuniqueness", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_stdout(&out);
    assert_eq!(doc["backward"]["passed"], true);
    assert!(dir.path().join("sticking/trajectory.csv").is_file());
    assert!(dir.path().join("premerged/trajectory.csv").is_file());
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    assert_eq!(csflock(&["demo", "--name", "nope"]).status.code(), Some(2));
}

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &PAIR.replace("0.5}", "-1}"));
    let out = csflock(&["simulate", "--config", &cfg, "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    let cfg = write_config(dir.path(), &PAIR.replace("\"dim\": 1", "\"dim\": 1, \"extra\": 0"));
    let out = csflock(&["simulate", "--config", &cfg, "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = csflock(&["verify", "--run", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"kernel": {"kind": "cucker-smale", "K": 1.0, "beta": 0.5},
            "n": 6, "dim": 2, "t_final": 2.0, "seed": 7,
            "initial": {"random": {}}, "output": {"dense": false}}"#,
    );
    let out_dir = dir.path().join("sweep");
    let out = csflock(&["sweep", "--config", &cfg, "--levels", "3", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_stdout(&out);
    assert_eq!(doc["report"]["levels"].as_array().unwrap().len(), 3);
    assert!(doc["min_order"].as_f64().unwrap() > 1.0);
    assert!(out_dir.join("sweep.json").is_file());
    assert_eq!(csflock(&["sweep", "--config", &cfg, "--levels", "1"]).status.code(), Some(2));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(csflock(&["--help"]).status.code(), Some(0));
    let out = csflock(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("csflock 0.1.0"));
    assert_eq!(csflock(&["simulate"]).status.code(), Some(2));
}
