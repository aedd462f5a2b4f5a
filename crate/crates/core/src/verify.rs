//! Verification of a finished run against the model's conservation laws,
//! bounds and, for two particles, the reference solution.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    dissipation_bound_check, energy_identity_residual, interpolation_check,
    interval_integrability_check, total_variation_mean, uniform_bounds_check, TrajectoryPair,
};
use crate::integrator::{DenseTrajectory, EventRecord, RunArtifacts};
use crate::oracle::{classify, first_integral_residual, inverse_power_integral, OutcomeClass, TwoBodyState};
use crate::weights::KernelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Momentum drift bound relative to `1 + |p(0)|`.
    pub momentum_tol: f64,
    /// Largest increase of `r` per step relative to `r(0)`.
    pub r_monotone_tol: f64,
    pub uniform_tol: f64,
    pub energy_target: f64,
    /// Exponents of the interpolation check; empty disables it.
    pub thetas: Vec<f64>,
    /// Relative tolerance on two-body sticking times.
    pub sticking_time_tol: f64,
    pub first_integral_tol: f64,
    /// Tolerance of the integrability check against the reference integral.
    pub integrability_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            momentum_tol: 1e-8,
            r_monotone_tol: 1e-8,
            uniform_tol: 1e-6,
            energy_target: 1e-2,
            thetas: vec![0.3, 0.5, 0.7],
            sticking_time_tol: 1e-3,
            first_integral_tol: 1e-4,
            integrability_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    pub fn threshold(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            skipped: false,
            value: Some(value),
            threshold: Some(threshold),
            detail: detail.into(),
        }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            passed: value >= threshold,
            ..Self::threshold(name, value, threshold, detail)
        }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            skipped: false,
            value: None,
            threshold: None,
            detail: detail.into(),
        }
    }

    pub fn skipped(name: &str, detail: impl Into<String>) -> Self {
        Self {
            skipped: true,
            ..Self::flag(name, true, detail)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
        self.passed = self.checks.iter().all(|c| c.passed);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Runs every applicable check on a finished run.
pub fn verify_run(run: &RunArtifacts, opts: &VerifyOptions) -> VerificationReport {
    let mut rep = VerificationReport {
        passed: true,
        checks: Vec::new(),
    };
    let series = &run.diagnostics;
    let n = run.initial_state.n_particles();
    let t_final = run.trajectory.times.last().copied().unwrap_or(0.0);

    let p0 = series.momentum.first().cloned().unwrap_or_default();
    let drift = series
        .momentum
        .iter()
        .map(|p| norm(&p.iter().zip(&p0).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    rep.push(Check::threshold(
        "momentum_drift",
        drift,
        opts.momentum_tol * (1.0 + norm(&p0)),
        "max |p(t) − p(0)|",
    ));

    let r0 = series.r.first().copied().unwrap_or(0.0);
    let rise = (1..series.len())
        .map(|k| series.r[k] - series.r_after(k - 1))
        .fold(0.0, f64::max);
    rep.push(Check::threshold(
        "r_monotone",
        rise,
        opts.r_monotone_tol * r0,
        "largest per-step increase of the velocity diameter",
    ));

    let c1 = (0..n)
        .map(|i| norm(run.initial_state.velocity(i)))
        .fold(0.0, f64::max);
    let ub = uniform_bounds_check(series, &run.trajectory, c1, t_final, opts.uniform_tol);
    rep.push(Check::flag(
        "uniform_bounds",
        ub.holds,
        format!(
            "max speed {:e} and displacement {:e} against C1 = {:e}, T = {}",
            ub.max_speed, ub.max_displacement, c1, t_final
        ),
    ));

    let scale = 1.0 + r0;
    match energy_identity_residual(series, opts.energy_target) {
        Ok(e) => rep.push(Check::threshold(
            "energy_identity",
            e.residual,
            opts.energy_target,
            format!(
                "{} interval(s), quadrature error {:e}",
                e.per_interval.len(),
                e.quadrature_error
            ),
        )),
        Err(e) => rep.push(Check::flag("energy_identity", false, e.to_string())),
    }

    let slack = series.coupling_n * series.quadrature_error + 1e-12 * scale;
    let db = dissipation_bound_check(series, c1, slack);
    rep.push(Check::flag(
        "dissipation_bound",
        db.holds,
        format!(
            "∫R = {:e}, r(0)/2 = {:e}, margin {:e}; margins against N²C1² and C1N²: {:e}, {:e}",
            db.integral, db.half_r0, db.margin, db.margin_n2c1sq, db.margin_c1n2
        ),
    ));

    let stickings: Vec<&EventRecord> = run.sticking_events().collect();
    rep.push(Check::threshold(
        "sticking_count",
        stickings.len() as f64,
        n.saturating_sub(1) as f64,
        "sticking events against N − 1",
    ));

    rep.push(clusters_check(run, stickings.len()));

    let ordered = run.events.windows(2).all(|w| w[0].t <= w[1].t);
    rep.push(Check::flag("events_ordered", ordered, "event times nondecreasing"));

    let tv = total_variation_mean(series);
    rep.push(Check::flag(
        "total_variation_finite",
        tv.is_finite(),
        format!("(1/N) Σ ∫|v̇_i| = {tv:e}"),
    ));

    match &run.dense {
        Some(dense) if !opts.thetas.is_empty() => {
            rep.push(interpolation_checks(run, dense, &opts.thetas))
        }
        _ => rep.push(Check::skipped(
            "interpolation",
            "no dense output recorded",
        )),
    }

    for c in two_body_checks(run, opts) {
        rep.push(c);
    }
    rep
}

/// Merges coarsen the partition, match the sticking events and show in the
/// samples as coinciding particles.
fn clusters_check(run: &RunArtifacts, stickings: usize) -> Check {
    let init = run.initial_state.partition();
    let fin = run.final_state.partition();
    let mut problems = Vec::new();
    if !init.is_refinement_of(fin) {
        problems.push("final partition does not coarsen the initial one".to_string());
    }
    if fin.merge_count() - init.merge_count() != stickings {
        problems.push(format!(
            "{} merges for {} sticking events",
            fin.merge_count() - init.merge_count(),
            stickings
        ));
    }
    let traj = &run.trajectory;
    for e in run.sticking_events() {
        let (i, j) = (e.members[0], e.members[1]);
        for k in 0..traj.len() {
            if traj.times[k] <= e.t_detect {
                continue;
            }
            let same = traj.x(k, i) == traj.x(k, j) && traj.v(k, i) == traj.v(k, j);
            if !same {
                problems.push(format!(
                    "particles {i} and {j} differ at t = {} after sticking",
                    traj.times[k]
                ));
                break;
            }
        }
    }
    let passed = problems.is_empty();
    let detail = if passed {
        format!("{} clusters at the end", fin.cluster_count())
    } else {
        problems.join("; ")
    };
    Check::flag("cluster_coarsening", passed, detail)
}

fn interpolation_checks(run: &RunArtifacts, dense: &DenseTrajectory, thetas: &[f64]) -> Check {
    let n = run.initial_state.n_particles();
    let init = run.initial_state.partition();
    let jobs: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !init.same(i, j))
        .flat_map(|(i, j)| thetas.iter().map(move |&th| (i, j, th)))
        .collect();
    if jobs.is_empty() {
        return Check::skipped("interpolation", "no inter-cluster pairs");
    }
    let workers = std::thread::available_parallelism()
        .map_or(1, |w| w.get())
        .min(jobs.len());
    let chunk = jobs.len().div_ceil(workers);
    let results: Vec<Result<f64, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&(i, j, th)| {
                            let pair = TrajectoryPair::new(dense, &run.events, i, j);
                            match interpolation_check(&pair, th) {
                                Ok(r) if r.satisfied => Ok(r.lhs - r.rhs_integral - r.boundary),
                                Ok(r) => Err(format!(
                                    "pair ({i}, {j}), θ = {th}: lhs {:e} > rhs {:e} + boundary {:e}",
                                    r.lhs, r.rhs_integral, r.boundary
                                )),
                                Err(e) => Err(format!("pair ({i}, {j}), θ = {th}: {e}")),
                            }
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("interpolation worker panicked"))
            .collect()
    });
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let worst = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut c = Check::flag(
        "interpolation",
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{} pair checks satisfied, largest lhs − rhs = {worst:e}",
                results.len()
            )
        } else {
            format!(
                "{} of {} failed: {}",
                failures.len(),
                results.len(),
                failures.iter().take(3).map(|s| s.as_str()).collect::<Vec<_>>().join("; ")
            )
        },
    );
    c.value = worst.is_finite().then_some(worst);
    c
}

/// Relative coordinates of a two-particle run along the first axis, or the
/// reason the reference solution does not apply.
fn reduced_pair(run: &RunArtifacts) -> Result<(f64, f64, f64, f64), String> {
    let s = &run.initial_state;
    if s.n_particles() != 2 {
        return Err("needs two particles".into());
    }
    let alpha = match run.kernel.kind() {
        KernelKind::Singular { alpha } if alpha < 1.0 => alpha,
        _ => return Err("needs a singular kernel with alpha < 1".into()),
    };
    if s.partition().same(0, 1) {
        return Err("the pair starts merged".into());
    }
    let d = s.dim();
    let w: Vec<f64> = (0..d).map(|c| s.position(1)[c] - s.position(0)[c]).collect();
    let u: Vec<f64> = (0..d).map(|c| s.velocity(1)[c] - s.velocity(0)[c]).collect();
    if w[1..].iter().chain(&u[1..]).any(|&a| a != 0.0) {
        return Err("relative motion leaves the first axis".into());
    }
    let sign = if w[0] < 0.0 { -1.0 } else { 1.0 };
    let kappa = 2.0 * s.normalization().coupling(2);
    Ok((sign * w[0], sign * u[0], alpha, kappa))
}

fn two_body_checks(run: &RunArtifacts, opts: &VerifyOptions) -> Vec<Check> {
    let (w0, u0, alpha, kappa) = match reduced_pair(run) {
        Ok(v) => v,
        Err(why) => return vec![Check::skipped("two_body", why)],
    };
    if !(w0 > 0.0 && u0 < 0.0) {
        return vec![Check::skipped("two_body", "the pair is not approaching")];
    }
    let init = match TwoBodyState::new(w0, u0 / kappa, alpha) {
        Ok(s) => s,
        Err(e) => return vec![Check::flag("two_body", false, e.to_string())],
    };
    let out = match classify(&init) {
        Ok(o) => o,
        Err(e) => return vec![Check::flag("two_body", false, e.to_string())],
    };
    let mut checks = Vec::new();
    let t_final = run.trajectory.times.last().copied().unwrap_or(0.0);
    let t_event = out.t_event.map(|t| t / kappa);
    let stick: Vec<&EventRecord> = run.sticking_events().collect();
    let coll: Vec<&EventRecord> = run.collision_events().collect();
    let eps_v = run.control.eps_v;
    let within = |t: Option<f64>| t.is_some_and(|t| t <= t_final);
    // A crossing slower than the sticking tolerance is indistinguishable from sticking.
    let slow_crossing =
        out.class == OutcomeClass::Crossing && out.impact_speed.is_some_and(|s| kappa * s <= eps_v);
    let (expected, ok) = match out.class {
        OutcomeClass::ExactSticking if within(t_event) => ("one sticking", stick.len() == 1 && coll.is_empty()),
        OutcomeClass::Crossing if within(t_event) && slow_crossing => (
            "one sticking or one collision",
            stick.len() + coll.len() == 1,
        ),
        OutcomeClass::Crossing if within(t_event) => ("one collision", stick.is_empty() && coll.len() == 1),
        _ => ("no event", run.events.is_empty()),
    };
    checks.push(Check::flag(
        "two_body_class",
        ok,
        format!(
            "reference {:?} at t = {:?}; expected {expected}, found {} sticking and {} collision",
            out.class,
            t_event,
            stick.len(),
            coll.len()
        ),
    ));

    if let (OutcomeClass::ExactSticking, Some(t), [e]) = (out.class, t_event, stick.as_slice()) {
        checks.push(Check::threshold(
            "two_body_sticking_time",
            (e.t - t).abs() / t,
            opts.sticking_time_tol,
            format!("engine {} against reference {t}", e.t),
        ));
    }
    if let (OutcomeClass::Crossing, Some(speed), [e]) = (out.class, out.impact_speed, coll.as_slice()) {
        let expect = kappa * speed;
        checks.push(Check::threshold(
            "two_body_impact_speed",
            (e.excess_speed - expect).abs() / expect,
            opts.sticking_time_tol,
            format!("engine {} against reference {expect}", e.excess_speed),
        ));
    }

    let cut = stick.first().map_or(f64::INFINITY, |e| e.t_detect);
    let traj = &run.trajectory;
    let s0 = &run.initial_state;
    let sign = if s0.position(1)[0] < s0.position(0)[0] { -1.0 } else { 1.0 };
    let samples: Vec<(f64, f64)> = (0..traj.len())
        .filter(|&k| traj.times[k] < cut)
        .map(|k| {
            let w = traj.x(k, 1)[0] - traj.x(k, 0)[0];
            let u = traj.v(k, 1)[0] - traj.v(k, 0)[0];
            (sign * w, sign * u)
        })
        .collect();
    // An asymptotic approach drives u to zero, where roundoff may flip its
    // sign; the reduction stops there.
    let u_first = samples.first().map_or(0.0, |s| s.1);
    let flip = samples.iter().position(|&(_, u)| u * u_first < 0.0);
    let kept = flip.unwrap_or(samples.len());
    let spurious = flip.is_none_or(|k| samples[k].1.abs() <= run.control.eps_v);
    match first_integral_residual(&samples[..kept], &run.kernel, kappa) {
        Ok(r) if spurious => checks.push(Check::threshold(
            "two_body_first_integral",
            r,
            opts.first_integral_tol,
            format!("drift of u + κΦ(w) over {kept} samples before any merge"),
        )),
        Ok(_) => checks.push(Check::flag(
            "two_body_first_integral",
            false,
            format!("relative velocity reverses at t = {}", traj.times[kept]),
        )),
        Err(e) => checks.push(Check::flag("two_body_first_integral", false, e.to_string())),
    }

    if let (OutcomeClass::Crossing, Some(tc), Some(dense)) = (out.class, t_event, &run.dense) {
        if within(Some(tc)) {
            let t2 = (2.0 * tc).min(t_final);
            let theta = 0.5;
            let pair = TrajectoryPair::windowed(dense, &run.events, 0, 1, 0.0, t2);
            let reference = inverse_power_integral(&init, theta, 0.0, kappa * t2, 1e-12).map(|v| v / kappa);
            match (interval_integrability_check(&pair, theta), reference) {
                (Ok(r), Ok(v)) => checks.push(Check::threshold(
                    "two_body_integrability",
                    (r.value - v).abs(),
                    opts.integrability_tol * (1.0 + v),
                    format!("∫|w|^(−1/2) on [0, {t2}]: engine {} against reference {v}", r.value),
                )),
                (Err(e), _) => checks.push(Check::flag("two_body_integrability", false, e.to_string())),
                (_, Err(e)) => checks.push(Check::flag("two_body_integrability", false, e.to_string())),
            }
        }
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_tracks_failures() {
        let mut r = VerificationReport {
            passed: true,
            checks: vec![],
        };
        r.push(Check::threshold("a", 1.0, 2.0, ""));
        assert!(r.passed);
        r.push(Check::skipped("b", "n/a"));
        assert!(r.passed);
        r.push(Check::at_least("c", 0.05, 0.1, ""));
        assert!(!r.passed);
        assert_eq!(r.failures().count(), 1);
        assert_eq!(r.get("c").unwrap().threshold, Some(0.1));
    }
}
