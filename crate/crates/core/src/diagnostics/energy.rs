use serde::{Deserialize, Serialize};

use super::{DiagnosticsError, DiagnosticsSeries};
use crate::integrator::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentity {
    /// `max_k |c N ∫R − ½ (r(T_k) − r(T_{k+1}))| / (1 + r(0))` over the
    /// inter-merge intervals.
    pub residual: f64,
    pub per_interval: Vec<f64>,
    /// Accumulated error estimate of `∫R`, on the same relative scale.
    pub quadrature_error: f64,
}

/// Residual of the dissipation identity on every interval between merges.
///
/// Fails with `InsufficientSampling` when the quadrature error estimate of
/// `∫R` exceeds `target`.
pub fn energy_identity_residual(
    series: &DiagnosticsSeries,
    target: f64,
) -> Result<EnergyIdentity, DiagnosticsError> {
    if series.is_empty() {
        return Err(DiagnosticsError::InsufficientSampling("empty series".into()));
    }
    let scale = 1.0 + series.r[0];
    let q_err = series.coupling_n * series.quadrature_error / scale;
    if !(q_err <= target) {
        return Err(DiagnosticsError::InsufficientSampling(format!(
            "quadrature error {q_err:e} exceeds the target {target:e}"
        )));
    }
    let per_interval: Vec<f64> = series
        .intervals()
        .into_iter()
        .map(|(a, r_a, b, r_b)| {
            let integral = series.dissipated[b] - series.dissipated[a];
            (series.coupling_n * integral - 0.5 * (r_a - r_b)).abs() / scale
        })
        .collect();
    let residual = per_interval.iter().copied().fold(0.0, f64::max);
    Ok(EnergyIdentity {
        residual,
        per_interval,
        quadrature_error: q_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationBound {
    /// `c N ∫₀ᵀ R dt`.
    pub integral: f64,
    pub half_r0: f64,
    /// `½ r(0) − c N ∫R`; equals `½ r(T)` plus the merge losses.
    pub margin: f64,
    pub holds: bool,
    /// Margin against the looser `N² C₁²` form, `C₁ = max |v_i(0)|`.
    pub margin_n2c1sq: f64,
    /// Margin against the `C₁ N²` form that ends the original argument.
    pub margin_c1n2: f64,
}

/// Checks `c N ∫₀ᵀ R dt ≤ ½ r(0)`; `slack` absorbs quadrature error.
pub fn dissipation_bound_check(
    series: &DiagnosticsSeries,
    c1: f64,
    slack: f64,
) -> DissipationBound {
    let integral = series.coupling_n * series.dissipated.last().copied().unwrap_or(0.0);
    let half_r0 = 0.5 * series.r.first().copied().unwrap_or(0.0);
    let n = series.n_particles as f64;
    let margin = half_r0 - integral;
    DissipationBound {
        integral,
        half_r0,
        margin,
        holds: margin >= -slack,
        margin_n2c1sq: n * n * c1 * c1 - integral,
        margin_c1n2: c1 * n * n - integral,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBounds {
    pub c1: f64,
    pub max_speed: f64,
    pub max_displacement: f64,
    pub horizon: f64,
    pub holds: bool,
}

/// `sup |v_i| ≤ C₁ (1 + tol)` over every recorded step and
/// `sup |x_i(t) − x_i(0)| ≤ T C₁ (1 + tol)` over the trajectory samples.
pub fn uniform_bounds_check(
    series: &DiagnosticsSeries,
    trajectory: &Trajectory,
    c1: f64,
    horizon: f64,
    tol: f64,
) -> UniformBounds {
    let max_speed = series.max_speed.iter().copied().fold(0.0, f64::max);
    let mut max_displacement: f64 = 0.0;
    if !trajectory.is_empty() {
        for k in 0..trajectory.len() {
            for i in 0..trajectory.n_particles {
                let d2: f64 = trajectory
                    .x(k, i)
                    .iter()
                    .zip(trajectory.x(0, i))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                max_displacement = max_displacement.max(d2.sqrt());
            }
        }
    }
    let holds = max_speed <= c1 * (1.0 + tol) && max_displacement <= horizon * c1 * (1.0 + tol);
    UniformBounds {
        c1,
        max_speed,
        max_displacement,
        horizon,
        holds,
    }
}

/// `∫₀ᵀ |v̇_i| dt` accumulated over the run.
pub fn total_variation(series: &DiagnosticsSeries, i: usize) -> f64 {
    series.v_increments.iter().map(|inc| inc[i]).sum()
}

/// `(1/N) Σ_i ∫₀ᵀ |v̇_i| dt`.
pub fn total_variation_mean(series: &DiagnosticsSeries) -> f64 {
    let n = series.n_particles;
    if n == 0 {
        return 0.0;
    }
    (0..n).map(|i| total_variation(series, i)).sum::<f64>() / n as f64
}
