use csflock::config::Overrides;
use csflock::scenarios::{run_scenario, SCENARIOS};

#[test]
fn every_shipped_scenario_passes_verification() {
    for name in SCENARIOS {
        let r = run_scenario(name, &Overrides::default(), None, "test").unwrap();
        let failed: Vec<_> = r.report.failures().map(|c| (&c.name, &c.detail)).collect();
        assert!(r.passed(), "{name}: {failed:?}");
    }
}

#[test]
fn flock_classic_has_no_events_and_decreasing_r() {
    let r = run_scenario("flock-classic", &Overrides::default(), None, "test").unwrap();
    assert!(r.run.events.is_empty());
    let series = &r.run.diagnostics.r;
    assert!(series.windows(2).all(|w| w[1] <= w[0]));
    assert!(series.last().unwrap() < &series[0]);
}

#[test]
fn overrides_reach_the_run() {
    let o = Overrides {
        alpha: Some(0.2),
        t_final: Some(1.0),
        ..Overrides::default()
    };
    let r = run_scenario("many-body", &o, None, "test").unwrap();
    assert_eq!(r.run.kernel.alpha(), Some(0.2));
    assert_eq!(r.run.trajectory.times.last(), Some(&1.0));
}
