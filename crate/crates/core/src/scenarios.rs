//! Named scenarios and the backward non-uniqueness demonstration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, Overrides, RandomCloud, SimConfig};
use crate::export::{self, ExportError};
use crate::integrator::{simulate, RunArtifacts, SimulateError};
use crate::model::{Normalization, ParticleSystem};
use crate::oracle::{classify, TwoBodyState};
use crate::verify::{verify_run, Check, VerificationReport, VerifyOptions};
use crate::weights::WeightKernel;

pub const CRITICAL_PAIR: &str = "critical-pair";
pub const CROSSING_PAIR: &str = "crossing-pair";
pub const BACKWARD_NONUNIQUENESS: &str = "backward-nonuniqueness";
pub const FLOCK_CLASSIC: &str = "flock-classic";
pub const MANY_BODY: &str = "many-body";

pub const SCENARIOS: [&str; 5] = [
    CRITICAL_PAIR,
    CROSSING_PAIR,
    BACKWARD_NONUNIQUENESS,
    FLOCK_CLASSIC,
    MANY_BODY,
];

/// Seed of the random clouds in the shipped scenarios.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`; expected one of {SCENARIOS:?}")]
    Unknown(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

/// The configuration document of a shipped scenario.
pub fn scenario_document(name: &str) -> Option<Value> {
    let doc = match name {
        CRITICAL_PAIR | BACKWARD_NONUNIQUENESS => json!({
            "kernel": {"kind": "singular", "alpha": 0.5},
            "n": 2, "dim": 1, "t_final": 2.0,
            "initial": {"scenario": CRITICAL_PAIR, "w0": 1.0},
            "output": {"sample_dt": 0.005}
        }),
        CROSSING_PAIR => json!({
            "kernel": {"kind": "singular", "alpha": 0.5},
            "n": 2, "dim": 1, "t_final": 10.0,
            "initial": {"scenario": CROSSING_PAIR, "w0": 1.0, "u0": -3.0},
            "output": {"sample_dt": 0.02}
        }),
        FLOCK_CLASSIC => json!({
            "kernel": {"kind": "cucker-smale", "K": 1.0, "beta": 0.5},
            "n": 10, "dim": 2, "t_final": 5.0, "seed": DEFAULT_SEED,
            "initial": {"scenario": FLOCK_CLASSIC}
        }),
        MANY_BODY => json!({
            "kernel": {"kind": "singular", "alpha": 0.3},
            "n": 10, "dim": 1, "t_final": 5.0, "seed": DEFAULT_SEED,
            "initial": {"scenario": MANY_BODY}
        }),
        _ => return None,
    };
    Some(doc)
}

/// A shipped scenario with overrides applied.
pub fn scenario_config(name: &str, overrides: &Overrides) -> Result<SimConfig, ScenarioError> {
    let mut doc = scenario_document(name).ok_or_else(|| ScenarioError::Unknown(name.into()))?;
    overrides.apply(&mut doc)?;
    Ok(SimConfig::from_value(doc)?)
}

/// Coupling of the relative motion of two singletons, `κ = 2c`.
pub fn pair_kappa(n: usize, normalization: Normalization) -> f64 {
    2.0 * normalization.coupling(n)
}

/// Two particles at `∓w0/2` on the first axis with velocities `∓u0/2`.
pub fn pair_state(w0: f64, u0: f64, dim: usize, normalization: Normalization) -> ParticleSystem {
    let mut x = vec![0.0; 2 * dim];
    let mut v = vec![0.0; 2 * dim];
    x[0] = -0.5 * w0;
    x[dim] = 0.5 * w0;
    v[0] = -0.5 * u0;
    v[dim] = 0.5 * u0;
    ParticleSystem::new(x, v, dim, normalization).expect("finite pair state")
}

/// Relative velocity that makes a pair at separation `w0` stick exactly:
/// `u0 = −κ Ψ(w0)`.
pub fn critical_velocity(kernel: &WeightKernel, w0: f64, kappa: f64) -> Option<f64> {
    let p = kernel.raw().floored_primitive(w0);
    p.is_finite().then_some(-kappa * p)
}

/// Initial state named by a scenario inside a configuration.
#[allow(clippy::too_many_arguments)]
pub fn initial_state(
    name: &str,
    w0: Option<f64>,
    u0: Option<f64>,
    n: usize,
    dim: usize,
    kernel: WeightKernel,
    normalization: Normalization,
    seed: u64,
) -> Result<ParticleSystem, ConfigError> {
    let path = "initial.scenario";
    match name {
        CRITICAL_PAIR | CROSSING_PAIR => {
            if n != 2 {
                return Err(ConfigError::schema("n", format!("scenario `{name}` needs n = 2, got {n}")));
            }
            let w0 = w0.unwrap_or(1.0);
            if !(w0.is_finite() && w0 > 0.0) {
                return Err(ConfigError::schema("initial.w0", format!("w0 must be positive, got {w0}")));
            }
            let u0 = match (name, u0) {
                (_, Some(u)) => u,
                (CROSSING_PAIR, None) => -3.0,
                _ => critical_velocity(&kernel, w0, pair_kappa(2, normalization)).ok_or_else(|| {
                    ConfigError::schema(
                        "kernel",
                        "the critical velocity needs an integrable kernel (alpha < 1)",
                    )
                })?,
            };
            if !u0.is_finite() {
                return Err(ConfigError::schema("initial.u0", "u0 must be finite"));
            }
            Ok(pair_state(w0, u0, dim, normalization))
        }
        FLOCK_CLASSIC | MANY_BODY => {
            if w0.is_some() || u0.is_some() {
                return Err(ConfigError::schema(
                    "initial",
                    format!("w0 and u0 apply to two-body scenarios, not `{name}`"),
                ));
            }
            RandomCloud::default()
                .sample(n, dim, seed, normalization)
                .map_err(|m| ConfigError::schema(path, m))
        }
        BACKWARD_NONUNIQUENESS => Err(ConfigError::schema(
            path,
            "`backward-nonuniqueness` compares two runs; use the demo command",
        )),
        other => Err(ConfigError::schema(
            path,
            format!("unknown scenario `{other}`; expected one of {SCENARIOS:?}"),
        )),
    }
}

/// Outcome of the backward non-uniqueness demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardDemo {
    /// Oracle sticking time of the critical pair.
    pub t_stick: f64,
    /// Sup distance between the runs on `[t_stick + margin, T]`.
    pub after: f64,
    /// Sup distance on `[0, t_stick − margin]`.
    pub before: f64,
    pub margin: f64,
    pub passed: bool,
}

/// Thresholds of the demonstration.
pub const BACKWARD_AFTER_TOL: f64 = 1e-6;
pub const BACKWARD_BEFORE_MIN: f64 = 0.1;
pub const BACKWARD_MARGIN: f64 = 0.01;

/// Runs the critical pair and a pre-merged cluster sitting at the critical
/// pair's post-sticking state. Both solve the forward problem; they agree
/// after the sticking time and differ before it.
pub fn backward_nonuniqueness(
    overrides: &Overrides,
) -> Result<(SimConfig, SimConfig, RunArtifacts, RunArtifacts, BackwardDemo), ScenarioError> {
    let sticking_cfg = scenario_config(BACKWARD_NONUNIQUENESS, overrides)?;
    let kernel = sticking_cfg.weight_kernel();
    let alpha = kernel.alpha().filter(|a| *a < 1.0).ok_or_else(|| {
        ConfigError::schema("kernel.alpha", "the demo needs a singular kernel with alpha < 1")
    })?;
    let init = sticking_cfg.initial_state()?;
    let d = init.dim();
    let w0 = init.position(1)[0] - init.position(0)[0];
    let kappa = pair_kappa(2, sticking_cfg.normalization);
    // The reduced pair with coupling κ is the unit-coupling pair in time κt
    // with relative velocity u/κ.
    let u0 = (init.velocity(1)[0] - init.velocity(0)[0]) / kappa;
    let reduced = TwoBodyState::new(w0, u0, alpha)
        .map_err(|e| ConfigError::schema("kernel.alpha", e.to_string()))?;
    let t_stick = classify(&reduced)
        .ok()
        .and_then(|o| o.t_event)
        .map(|t| t / kappa)
        .unwrap_or(f64::NAN);
    // The pair sticks at its centre of mass, which moves with the mean velocity.
    let centre: Vec<f64> = (0..d)
        .map(|c| 0.5 * (init.position(0)[c] + init.position(1)[c]))
        .collect();
    let mean_v: Vec<f64> = (0..d)
        .map(|c| 0.5 * (init.velocity(0)[c] + init.velocity(1)[c]))
        .collect();
    let mut doc = sticking_cfg.to_value();
    doc["initial"] = json!({
        "positions": [centre.clone(), centre],
        "velocities": [mean_v.clone(), mean_v],
        "clusters": [[0, 1]],
    });
    let premerged_cfg = SimConfig::from_value(doc)?;
    let a = simulate(&sticking_cfg)?;
    let b = simulate(&premerged_cfg)?;
    let window = |lo: f64, hi: f64| {
        let (ta, tb) = (&a.trajectory, &b.trajectory);
        let mut m: f64 = 0.0;
        for (k, &t) in ta.times.iter().enumerate() {
            if t < lo || t > hi {
                continue;
            }
            if let Some(j) = tb.index_of(t) {
                for (p, q) in ta.positions[k].iter().zip(&tb.positions[j]) {
                    m = m.max((p - q).abs());
                }
                for (p, q) in ta.velocities[k].iter().zip(&tb.velocities[j]) {
                    m = m.max((p - q).abs());
                }
            }
        }
        m
    };
    let after = window(t_stick + BACKWARD_MARGIN, sticking_cfg.t_final);
    let before = window(0.0, t_stick - BACKWARD_MARGIN);
    let demo = BackwardDemo {
        t_stick,
        after,
        before,
        margin: BACKWARD_MARGIN,
        passed: after <= BACKWARD_AFTER_TOL && before >= BACKWARD_BEFORE_MIN,
    };
    Ok((sticking_cfg, premerged_cfg, a, b, demo))
}

/// A scenario run with its verification.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub name: String,
    pub config: SimConfig,
    pub run: RunArtifacts,
    pub report: VerificationReport,
    /// The second run of the backward demonstration.
    pub companion: Option<(SimConfig, RunArtifacts, VerificationReport)>,
    pub backward: Option<BackwardDemo>,
}

impl ScenarioRun {
    pub fn passed(&self) -> bool {
        self.report.passed
            && self.companion.as_ref().is_none_or(|c| c.2.passed)
            && self.backward.as_ref().is_none_or(|b| b.passed)
    }
}

/// Simulates and verifies a shipped scenario; with `out`, writes its files.
///
/// The backward demonstration writes the sticking run to `out/sticking` and
/// the pre-merged run to `out/premerged`.
pub fn run_scenario(
    name: &str,
    overrides: &Overrides,
    out: Option<&Path>,
    build_id: &str,
) -> Result<ScenarioRun, ScenarioError> {
    let opts = VerifyOptions::default();
    if name == BACKWARD_NONUNIQUENESS {
        let (ca, cb, a, b, demo) = backward_nonuniqueness(overrides)?;
        let mut ra = verify_run(&a, &opts);
        let rb = verify_run(&b, &opts);
        ra.push(Check::threshold(
            "backward_after_sticking",
            demo.after,
            BACKWARD_AFTER_TOL,
            format!("sup distance on [t_stick + {}, T]", demo.margin),
        ));
        ra.push(Check::at_least(
            "backward_before_sticking",
            demo.before,
            BACKWARD_BEFORE_MIN,
            format!("sup distance on [0, t_stick − {}]", demo.margin),
        ));
        if let Some(dir) = out {
            export::export_run(&dir.join("sticking"), &a, &ca, &ra, build_id)?;
            export::export_run(&dir.join("premerged"), &b, &cb, &rb, build_id)?;
        }
        return Ok(ScenarioRun {
            name: name.into(),
            config: ca,
            run: a,
            report: ra,
            companion: Some((cb, b, rb)),
            backward: Some(demo),
        });
    }
    let config = scenario_config(name, overrides)?;
    let run = simulate(&config)?;
    let report = verify_run(&run, &opts);
    if let Some(dir) = out {
        export::export_run(dir, &run, &config, &report, build_id)?;
    }
    Ok(ScenarioRun {
        name: name.into(),
        config,
        run,
        report,
        companion: None,
        backward: None,
    })
}
