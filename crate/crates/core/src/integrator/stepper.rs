//! Embedded Runge-Kutta stepping over a fixed cluster partition.
//!
//! The packed state of a segment is `[x (n·d), v (n·d), q, tv (n)]` where `n`
//! is the number of clusters, `q` accumulates `∫R dt` under the stepping kernel
//! and `tv_k` accumulates `∫|v̇_k| dt`. Carrying the two integrals through the
//! same error-controlled scheme gives them the accuracy of the trajectory,
//! including across the integrable spikes at collisions.

use serde::{Deserialize, Serialize};

use super::control::StepControl;
use super::rk::{A, E, P};
use super::IntegratorError;
use crate::model::{ClusterFrame, ModelError, ParticleSystem};
use crate::weights::WeightKernel;

#[derive(Debug, Clone)]
pub(crate) struct Segment {
    pub frame: ClusterFrame,
    pub kernel: WeightKernel,
}

impl Segment {
    pub fn new(frame: ClusterFrame, kernel: WeightKernel) -> Self {
        Self { frame, kernel }
    }

    pub fn nd(&self) -> usize {
        self.frame.len() * self.frame.dim
    }

    pub fn state_len(&self) -> usize {
        2 * self.nd() + 1 + self.frame.len()
    }

    pub fn q_index(&self) -> usize {
        2 * self.nd()
    }

    pub fn tv_index(&self, slot: usize) -> usize {
        2 * self.nd() + 1 + slot
    }

    /// Packs a system into a fresh segment state with zeroed integrals.
    pub fn pack(&self, sys: &ParticleSystem) -> Vec<f64> {
        let (x, v) = self.frame.pack(sys);
        let mut y = Vec::with_capacity(self.state_len());
        y.extend_from_slice(&x);
        y.extend_from_slice(&v);
        y.resize(self.state_len(), 0.0);
        y
    }

    pub fn unpack_into(&self, sys: &mut ParticleSystem, y: &[f64], t: f64) {
        let nd = self.nd();
        self.frame.unpack_into(sys, &y[..nd], &y[nd..2 * nd]);
        sys.set_time(t);
    }

    pub fn derivative(&self, y: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        let nd = self.nd();
        let d = self.frame.dim;
        out[..nd].copy_from_slice(&y[nd..2 * nd]);
        let (x, rest) = y.split_at(nd);
        let v = &rest[..nd];
        let (_, tail) = out.split_at_mut(nd);
        let (acc, aux) = tail.split_at_mut(nd);
        let big_r = self
            .frame
            .accelerations_with_dissipation(x, v, &self.kernel, acc)?;
        aux[0] = big_r;
        for k in 0..self.frame.len() {
            let a2: f64 = acc[k * d..(k + 1) * d].iter().map(|a| a * a).sum();
            aux[1 + k] = a2.sqrt();
        }
        Ok(())
    }

    /// Smallest inter-cluster distance in a packed state; `∞` for one cluster.
    pub fn min_distance(&self, y: &[f64]) -> (f64, Option<(usize, usize)>) {
        let d = self.frame.dim;
        let mut best = (f64::INFINITY, None);
        for i in 0..self.frame.len() {
            for j in (i + 1)..self.frame.len() {
                let s2: f64 = (0..d).map(|c| (y[j * d + c] - y[i * d + c]).powi(2)).sum();
                if s2.sqrt() < best.0 {
                    best = (s2.sqrt(), Some((self.frame.label(i), self.frame.label(j))));
                }
            }
        }
        best
    }
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    /// End of validity; below `t0 + h` when the step was cut at an event.
    pub t_end: f64,
    pub y0: Vec<f64>,
    /// `coeffs[k * len + m]` multiplies `h θ^(k+1)` for component `m`.
    pub coeffs: Vec<f64>,
}

impl DenseStep {
    pub fn len(&self) -> usize {
        self.y0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y0.is_empty()
    }

    pub fn theta(&self, t: f64) -> f64 {
        ((t - self.t0) / self.h).clamp(0.0, 1.0)
    }

    pub fn component(&self, m: usize, theta: f64) -> f64 {
        let n = self.len();
        let c = &self.coeffs;
        let poly = theta
            * (c[m] + theta * (c[n + m] + theta * (c[2 * n + m] + theta * c[3 * n + m])));
        self.y0[m] + self.h * poly
    }

    pub fn eval(&self, theta: f64, out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            *o = self.component(m, theta);
        }
    }

    pub fn eval_vec(&self, theta: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval(theta, &mut out);
        out
    }
}

/// One accepted step of the packed system.
#[derive(Debug, Clone)]
pub(crate) struct Accepted {
    pub y1: Vec<f64>,
    pub dt: f64,
    pub error: f64,
    pub dt_next: f64,
    /// Local error estimate of the `∫R` component.
    pub q_error: f64,
    pub dense: DenseStep,
    pub rejected: usize,
    /// Derivative at the end of the step, reusable as the next first stage.
    pub f1: Vec<f64>,
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// Attempts steps from `(t, y)` with trial size `dt_try` until one is accepted.
///
/// `f0` is the derivative at `y` when already known. `dt_cap` bounds the step
/// (distance to the horizon). Stage evaluations that fail (non-finite values,
/// raw-kernel coincidences) count as rejections.
pub(crate) fn advance(
    seg: &Segment,
    t: f64,
    y: &[f64],
    f0: Option<&[f64]>,
    dt_try: f64,
    dt_cap: f64,
    ctrl: &StepControl,
) -> Result<Accepted, IntegratorError> {
    let n = y.len();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    match f0 {
        Some(f) => k[0].copy_from_slice(f),
        None => seg.derivative(y, &mut k[0]).map_err(IntegratorError::Model)?,
    }
    let mut h = dt_try.min(ctrl.dt_max).min(dt_cap);
    let mut rejected = 0usize;
    let mut stage = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut last_failure: Option<ModelError> = None;
    loop {
        let at_cap = h >= dt_cap;
        if h < ctrl.dt_min && !at_cap {
            let (distance, pair) = seg.min_distance(y);
            return Err(IntegratorError::StepUnderflow {
                t,
                dt: h,
                distance,
                pair,
                cause: last_failure.map(|e| e.to_string()),
            });
        }
        let mut failed = None;
        for s in 1..7 {
            for m in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][m];
                }
                stage[m] = y[m] + h * acc;
            }
            let (_, tail) = k.split_at_mut(s);
            if let Err(e) = seg.derivative(&stage, &mut tail[0]) {
                failed = Some(e);
                break;
            }
        }
        if let Some(e) = failed {
            last_failure = Some(e);
            rejected += 1;
            h *= 0.25;
            continue;
        }
        // Row 6 of A equals B, so the last stage is the propagated solution.
        y1.copy_from_slice(&stage);
        let mut acc = 0.0;
        let mut q_error = 0.0;
        for m in 0..n {
            let mut e = 0.0;
            for (s, es) in E.iter().enumerate() {
                e += es * k[s][m];
            }
            e *= h;
            if m == seg.q_index() {
                q_error = e.abs();
            }
            let scale = ctrl.abs_tol + ctrl.rel_tol * y[m].abs().max(y1[m].abs());
            acc += (e / scale).powi(2);
        }
        let err = (acc / n as f64).sqrt();
        if err.is_finite() && err <= 1.0 {
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            let factor = if rejected > 0 { factor.min(1.0) } else { factor };
            let mut coeffs = vec![0.0; 4 * n];
            for p in 0..4 {
                for m in 0..n {
                    let mut c = 0.0;
                    for s in 0..7 {
                        c += k[s][m] * P[s][p];
                    }
                    coeffs[p * n + m] = c;
                }
            }
            let dense = DenseStep {
                t0: t,
                h,
                t_end: t + h,
                y0: y.to_vec(),
                coeffs,
            };
            let f1 = std::mem::take(&mut k[6]);
            return Ok(Accepted {
                y1,
                dt: h,
                error: err,
                dt_next: (h * factor).min(ctrl.dt_max),
                q_error,
                dense,
                rejected,
                f1,
            });
        }
        rejected += 1;
        let factor = if err.is_finite() {
            (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
        } else {
            MIN_FACTOR
        };
        h *= factor;
    }
}

/// Error of an accepted step of size `dt` ending at `y1`, measured against
/// two half steps in the controller's norm; `None` when a half step is itself
/// refused.
///
/// The embedded estimate assumes a smooth right-hand side. Across a collision
/// the acceleration has an integrable cusp `|t − t_c|^(−α)` and the estimate
/// can miss most of the error, while the half-step difference does not.
pub(crate) fn halving_error(
    seg: &Segment,
    t: f64,
    y: &[f64],
    f0: Option<&[f64]>,
    dt: f64,
    y1: &[f64],
    ctrl: &StepControl,
) -> Option<f64> {
    let half = 0.5 * dt;
    let a = advance(seg, t, y, f0, half, half, ctrl).ok()?;
    if a.dt != half {
        return None;
    }
    let b = advance(seg, t + half, &a.y1, Some(&a.f1), half, half, ctrl).ok()?;
    if b.dt != half {
        return None;
    }
    let n = y.len();
    let acc: f64 = (0..n)
        .map(|m| {
            let scale = ctrl.abs_tol + ctrl.rel_tol * y1[m].abs().max(b.y1[m].abs());
            ((y1[m] - b.y1[m]) / scale).powi(2)
        })
        .sum();
    Some((acc / n as f64).sqrt())
}

/// Result of [`step_adaptive`].
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: ParticleSystem,
    pub dt: f64,
    pub error: f64,
    /// Suggested size for the following step.
    pub dt_next: f64,
    pub dense: DenseStep,
}

/// One accepted Dormand-Prince 5(4) step of the cluster dynamics.
///
/// The kernel is used as given; pass a floored kernel so that crossing
/// clusters stay finite. Members of each cluster are re-synchronized from
/// their representative after the step.
pub fn step_adaptive(
    state: &ParticleSystem,
    kernel: &WeightKernel,
    ctrl: &StepControl,
    dt_try: f64,
) -> Result<StepOutcome, IntegratorError> {
    ctrl.validate()?;
    let seg = Segment::new(state.frame(), *kernel);
    let y = seg.pack(state);
    let acc = advance(&seg, state.t(), &y, None, dt_try, f64::INFINITY, ctrl)?;
    let mut next = state.clone();
    seg.unpack_into(&mut next, &acc.y1, state.t() + acc.dt);
    next.check_clusters().map_err(IntegratorError::Model)?;
    Ok(StepOutcome {
        state: next,
        dt: acc.dt,
        error: acc.error,
        dt_next: acc.dt_next,
        dense: acc.dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Normalization;

    fn ctrl() -> StepControl {
        StepControl::default()
    }

    #[test]
    fn equilibrium_translates_uniformly() {
        let s = ParticleSystem::new(
            vec![0.0, 1.0, -2.5, 0.25],
            vec![0.3, -0.1, 0.3, -0.1],
            2,
            Normalization::OverN,
        )
        .unwrap();
        let k = WeightKernel::singular(0.4).unwrap().with_floor(1e-10).unwrap();
        let out = step_adaptive(&s, &k, &ctrl(), 0.05).unwrap();
        assert_eq!(out.state.velocities(), s.velocities());
        for i in 0..4 {
            let expect = s.positions()[i] + s.velocities()[i] * out.dt;
            let got = out.state.positions()[i];
            assert!((got - expect).abs() <= 4.0 * f64::EPSILON * expect.abs().max(1.0));
        }
    }

    #[test]
    fn symmetric_pair_keeps_midpoint() {
        let mut s =
            ParticleSystem::new(vec![-1.0, 1.0], vec![1.0, -1.0], 1, Normalization::OverN).unwrap();
        let k = WeightKernel::singular(0.3).unwrap().with_floor(1e-10).unwrap();
        let mut dt = 1e-3;
        for _ in 0..50 {
            let out = step_adaptive(&s, &k, &ctrl(), dt).unwrap();
            let mid = 0.5 * (out.state.positions()[0] + out.state.positions()[1]);
            assert!(mid.abs() < 1e-15, "midpoint drifted to {mid}");
            dt = out.dt_next;
            s = out.state;
        }
        assert!(s.t() > 0.0);
    }

    #[test]
    fn dense_output_interpolates_endpoints() {
        let s =
            ParticleSystem::new(vec![0.0, 1.0], vec![0.5, -0.5], 1, Normalization::OverN).unwrap();
        let k = WeightKernel::singular(0.5).unwrap().with_floor(1e-10).unwrap();
        let out = step_adaptive(&s, &k, &ctrl(), 0.1).unwrap();
        let y0 = out.dense.eval_vec(0.0);
        assert_eq!(&y0[..2], s.positions());
        let y1 = out.dense.eval_vec(1.0);
        assert!((y1[0] - out.state.positions()[0]).abs() < 1e-14);
        assert!((y1[3] - out.state.velocities()[1]).abs() < 1e-14);
    }

    #[test]
    fn raw_kernel_underflows_at_coincidence() {
        let s =
            ParticleSystem::new(vec![0.0, 0.0], vec![0.0, 1.0], 1, Normalization::OverN).unwrap();
        let k = WeightKernel::singular(0.5).unwrap();
        let err = step_adaptive(&s, &k, &ctrl(), 0.1).unwrap_err();
        match err {
            IntegratorError::Model(_) | IntegratorError::StepUnderflow { .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
