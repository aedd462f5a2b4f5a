//! Time stepping, event handling and the piecewise restart loop.
//!
//! Between sticking times the cluster dynamics are advanced by an adaptive
//! Dormand-Prince 5(4) pair under a floored kernel. Collisions are integrated
//! through; a sticking merges the two clusters and restarts the stepper on the
//! coarser partition.

mod control;
mod events;
mod ladder;
mod rk;
mod simulate;
mod stepper;

use thiserror::Error;

use crate::model::ModelError;

pub use control::StepControl;
pub use events::{detect_events, merge, EventKind, EventRecord};
pub use ladder::{simulate_refinement_ladder, Ladder, LadderLevel, LadderReport};
pub use simulate::{
    simulate, simulate_system, DenseSegment, DenseTrajectory, RunArtifacts, RunOptions, RunStats,
    SimulateError, Trajectory,
};
pub use stepper::{step_adaptive, DenseStep, StepOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("invalid step control: {0}")]
    InvalidControl(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "step size underflow at t = {t}: dt = {dt:e}, closest pair {pair:?} at distance {distance:e}{}",
        cause.as_ref().map(|c| format!(" ({c})")).unwrap_or_default()
    )]
    StepUnderflow {
        t: f64,
        dt: f64,
        distance: f64,
        pair: Option<(usize, usize)>,
        cause: Option<String>,
    },
    #[error("step budget of {0} accepted steps exhausted at t = {1}")]
    StepBudget(usize, f64),
    #[error("invalid merge: {0}")]
    InvalidMerge(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
