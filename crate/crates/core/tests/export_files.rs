use csflock::config::{Overrides, SimConfig};
use csflock::export::{self, read_events_jsonl, read_run, read_trajectory_csv};
use csflock::integrator::simulate;
use csflock::scenarios::{run_scenario, scenario_config, CRITICAL_PAIR, MANY_BODY};
use csflock::verify::{verify_run, VerifyOptions};

fn read(dir: &std::path::Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn single_particle_three_samples_gives_four_lines() {
    let cfg = SimConfig::from_json_str(
        r#"{"kernel": {"kind": "singular", "alpha": 0.5}, "n": 1, "dim": 1, "t_final": 1.0,
            "initial": {"positions": [[0.0]], "velocities": [[0.5]]},
            "output": {"sample_dt": 0.5}}"#,
    )
    .unwrap();
    let run = simulate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = verify_run(&run, &VerifyOptions::default());
    export::export_run(dir.path(), &run, &cfg, &report, "test").unwrap();
    let text = read(dir.path(), export::TRAJECTORY_FILE);
    assert_eq!(text.lines().count(), 4);
    assert_eq!(text.lines().next(), Some("t,x_0_0,v_0_0"));
    assert_eq!(text.lines().last(), Some("1.0,0.5,0.5"));
}

#[test]
fn critical_pair_logs_exactly_one_sticking() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario(CRITICAL_PAIR, &Overrides::default(), Some(dir.path()), "test").unwrap();
    assert!(r.passed());
    let events = read(dir.path(), export::EVENTS_FILE);
    let sticking: Vec<&str> = events.lines().filter(|l| l.contains("\"sticking\"")).collect();
    assert_eq!(sticking.len(), 1, "{events}");
    assert!(sticking[0].ends_with(r#""kind":"sticking","members":[0,1]}"#));
    let lines = read_events_jsonl(&events).unwrap();
    assert!((lines[0].t - 1.0).abs() < 1e-3);
}

#[test]
fn exported_trajectory_reads_back_bitwise() {
    let cfg = scenario_config(MANY_BODY, &Overrides::default()).unwrap();
    let run = simulate(&cfg).unwrap();
    let mut buf = Vec::new();
    export::write_trajectory_csv(&mut buf, &run.trajectory).unwrap();
    let back = read_trajectory_csv(&buf[..]).unwrap();
    assert_eq!(back.len(), run.trajectory.len());
    for (a, b) in back.positions.iter().flatten().zip(run.trajectory.positions.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(back, run.trajectory);
}

#[test]
fn summary_echoes_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(CRITICAL_PAIR, &Overrides::default(), Some(dir.path()), "build-xyz").unwrap();
    let stored = read_run(dir.path()).unwrap();
    assert_eq!(stored.build, "build-xyz");
    assert_eq!(stored.config, scenario_config(CRITICAL_PAIR, &Overrides::default()).unwrap());
    let header = read(dir.path(), export::DIAGNOSTICS_FILE);
    assert_eq!(header.lines().next(), Some("t,r,R,momentum_0,max_speed"));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), export::REPORT_FILE)).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn identical_configs_write_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        run_scenario(MANY_BODY, &Overrides::default(), Some(dir.path()), "test").unwrap();
    }
    for name in [
        export::TRAJECTORY_FILE,
        export::EVENTS_FILE,
        export::DIAGNOSTICS_FILE,
        export::REPORT_FILE,
        export::SUMMARY_FILE,
    ] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}
