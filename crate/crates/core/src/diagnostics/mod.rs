//! Checks of the analytic identities and bounds on computed trajectories.
//!
//! * the dissipation identity `∫ R dt = ½ (r(T_k) − r(T_{k+1}))` between merges
//!   and the bound `∫₀ᵀ R dt ≤ ½ r(0)`;
//! * uniform bounds on speeds and displacements;
//! * total variation of the velocities;
//! * the interpolation inequality
//!   `∫ |f′|² |f|^(−θ) ≤ C₂ ∫ |f″| + 𝓡(f, T) − 𝓡(f, 0)` for pair separations;
//! * integrability of `|x_j − x_i|^(−θ)` across collisions.

mod energy;
mod interp;
mod series;

use thiserror::Error;

pub use energy::{
    dissipation_bound_check, energy_identity_residual, total_variation, total_variation_mean,
    uniform_bounds_check, DissipationBound, EnergyIdentity, UniformBounds,
};
pub use interp::{
    auto_theta, interpolation_check, interval_integrability_check, AnalyticPair, InterpCheckReport,
    IntegrabilityReport, PairSignal, PairValue, TrajectoryPair,
};
pub use series::{DiagnosticsSeries, MergeMark};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("insufficient sampling: {0}")]
    InsufficientSampling(String),
    #[error("divergence suspected: {0}")]
    DivergenceSuspected(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}
