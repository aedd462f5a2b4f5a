//! Repeated runs under geometrically tightened tolerances.

use serde::{Deserialize, Serialize};

use super::control::StepControl;
use super::simulate::{simulate_system, RunArtifacts, SimulateError};
use super::IntegratorError;
use crate::config::SimConfig;

/// Tolerance factor between consecutive levels.
pub const LADDER_FACTOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub level: usize,
    pub control: StepControl,
    pub floor: f64,
    pub accepted_steps: usize,
    pub mean_dt: f64,
    pub sticking_times: Vec<f64>,
    pub collisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub levels: Vec<LadderLevel>,
    /// Sup-norm distance between levels `k` and `k + 1` on the common grid.
    pub distances: Vec<f64>,
    /// `log(d_k / d_{k+1}) / log(h_k / h_{k+1})` with `h` the mean step size;
    /// `None` where a distance is zero or the step sizes coincide.
    pub orders: Vec<Option<f64>>,
}

impl LadderReport {
    /// Smallest finite observed order.
    pub fn min_order(&self) -> Option<f64> {
        self.orders.iter().flatten().copied().reduce(f64::min)
    }

    pub fn distances_decrease(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Runs of every level together with their comparison.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub runs: Vec<RunArtifacts>,
    pub report: LadderReport,
}

/// Reruns `config` at `levels` tolerance levels, each tightening the error
/// tolerances, the kernel floor and both event tolerances by
/// [`LADDER_FACTOR`]. Levels run concurrently.
pub fn simulate_refinement_ladder(
    config: &SimConfig,
    levels: usize,
) -> Result<Ladder, SimulateError> {
    if levels < 2 {
        return Err(IntegratorError::Config(format!("a ladder needs at least 2 levels, got {levels}")).into());
    }
    let (state, kernel, ctrl, opts) = config
        .build()
        .map_err(|e| IntegratorError::Config(e.to_string()))?;
    let setups: Vec<_> = (0..levels)
        .map(|l| {
            let f = LADDER_FACTOR.powi(l as i32);
            let k = kernel
                .with_floor(kernel.floor() * f)
                .expect("scaled floor stays valid");
            (l, k, ctrl.tightened(f))
        })
        .collect();
    let results: Vec<Result<RunArtifacts, SimulateError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = setups
            .iter()
            .map(|&(_, k, c)| {
                let (state, opts) = (state.clone(), opts.clone());
                scope.spawn(move || simulate_system(state, k, c, &opts))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ladder level panicked"))
            .collect()
    });
    let mut runs = Vec::with_capacity(levels);
    for r in results {
        runs.push(r?);
    }
    let report = compare(&runs);
    Ok(Ladder { runs, report })
}

/// Builds the ladder report of runs ordered from coarse to fine.
pub(crate) fn compare(runs: &[RunArtifacts]) -> LadderReport {
    let levels = runs
        .iter()
        .enumerate()
        .map(|(l, r)| LadderLevel {
            level: l,
            control: r.control,
            floor: r.kernel.floor(),
            accepted_steps: r.stats.accepted,
            mean_dt: r.stats.mean_dt,
            sticking_times: r.sticking_events().map(|e| e.t).collect(),
            collisions: r.collision_events().count(),
        })
        .collect::<Vec<_>>();
    let distances: Vec<f64> = runs
        .windows(2)
        .map(|w| w[0].trajectory.sup_distance(&w[1].trajectory).unwrap_or(f64::NAN))
        .collect();
    let orders = (0..distances.len().saturating_sub(1))
        .map(|k| {
            let (d0, d1) = (distances[k], distances[k + 1]);
            let (h0, h1) = (levels[k].mean_dt, levels[k + 1].mean_dt);
            if d0 > 0.0 && d1 > 0.0 && h0 > 0.0 && h1 > 0.0 && h0 != h1 {
                Some((d0 / d1).ln() / (h0 / h1).ln())
            } else {
                None
            }
        })
        .collect();
    LadderReport {
        levels,
        distances,
        orders,
    }
}
