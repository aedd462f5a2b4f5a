use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::integrator::{DenseTrajectory, EventRecord};
use crate::quadrature::{integrate_with_breaks, QuadOptions};

/// `f`, `f′` and `f″` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PairValue {
    pub f: Vec<f64>,
    pub df: Vec<f64>,
    pub ddf: Vec<f64>,
}

/// A vector signal with two derivatives on a time window.
pub trait PairSignal {
    fn span(&self) -> (f64, f64);
    fn eval(&self, t: f64) -> PairValue;
    /// Interior times where `f` may vanish or lose smoothness.
    fn breakpoints(&self) -> Vec<f64>;
}

/// A signal given by closures.
pub struct AnalyticPair<F, G, H> {
    pub f: F,
    pub df: G,
    pub ddf: H,
    pub t0: f64,
    pub t1: f64,
    pub breaks: Vec<f64>,
}

impl<F, G, H> PairSignal for AnalyticPair<F, G, H>
where
    F: Fn(f64) -> Vec<f64>,
    G: Fn(f64) -> Vec<f64>,
    H: Fn(f64) -> Vec<f64>,
{
    fn span(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    fn eval(&self, t: f64) -> PairValue {
        PairValue {
            f: (self.f)(t),
            df: (self.df)(t),
            ddf: (self.ddf)(t),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

/// `f = x_j − x_i` along a recorded run. `f″` comes from the right-hand side
/// under the raw kernel; after the pair merges the signal is zero.
pub struct TrajectoryPair<'a> {
    dense: &'a DenseTrajectory,
    i: usize,
    j: usize,
    t0: f64,
    t1: f64,
    breaks: Vec<f64>,
}

impl<'a> TrajectoryPair<'a> {
    /// The pair over the whole run. Event times and merge times become
    /// breakpoints of the quadratures.
    pub fn new(dense: &'a DenseTrajectory, events: &[EventRecord], i: usize, j: usize) -> Self {
        Self::windowed(dense, events, i, j, dense.t_start(), dense.t_end())
    }

    pub fn windowed(
        dense: &'a DenseTrajectory,
        events: &[EventRecord],
        i: usize,
        j: usize,
        t0: f64,
        t1: f64,
    ) -> Self {
        let mut breaks: Vec<f64> = events
            .iter()
            .flat_map(|e| [e.t, e.t_detect])
            .chain(events.iter().filter(|e| e.is_collision()).filter_map(|e| closest_approach(dense, e)))
            .chain(dense.breaks())
            .filter(|&t| t > t0 && t < t1)
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Self {
            dense,
            i,
            j,
            t0,
            t1,
            breaks,
        }
    }

    /// Whether the two particles share a cluster at `t`.
    pub fn merged_at(&self, t: f64) -> bool {
        self.dense
            .segment_at(t)
            .is_some_and(|s| s.slot_of(self.i) == s.slot_of(self.j))
    }
}

/// Time of closest approach of a colliding pair on the dense output itself.
///
/// The recorded collision time can be off by a few local errors when the
/// pair crosses in the step after the one where it was detected. A quadrature
/// node placed between the two would meet the coincidence, where the raw
/// kernel is infinite.
fn closest_approach(dense: &DenseTrajectory, e: &EventRecord) -> Option<f64> {
    let [i, j] = e.members[..] else { return None };
    let radial = |t: f64| -> Option<f64> {
        let (xi, vi) = dense.particle_state(i, t)?;
        let (xj, vj) = dense.particle_state(j, t)?;
        Some((0..xi.len()).map(|c| (xj[c] - xi[c]) * (vj[c] - vi[c])).sum())
    };
    let delta = (e.t - e.t_detect).abs().max(1e-9 * e.t.abs().max(1.0));
    let mut lo = (e.t - delta).max(dense.t_start());
    let mut hi = (e.t + delta).min(dense.t_end());
    if !(radial(lo)? < 0.0 && radial(hi)? > 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if radial(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

impl PairSignal for TrajectoryPair<'_> {
    fn span(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    fn eval(&self, t: f64) -> PairValue {
        let seg = self.dense.segment_at(t).expect("time inside the run");
        let d = seg.dim;
        let (a, b) = (seg.slot_of(self.i), seg.slot_of(self.j));
        if a == b {
            return PairValue {
                f: vec![0.0; d],
                df: vec![0.0; d],
                ddf: vec![0.0; d],
            };
        }
        let (x, v) = seg.packed_state(t);
        let frame = seg.frame(self.dense.n_particles);
        let kernel = self
            .dense
            .kernel
            .map(|k| k.raw())
            .expect("dense trajectory keeps its kernel");
        let mut acc_a = vec![0.0; d];
        let mut acc_b = vec![0.0; d];
        frame.acceleration_of(a, &x, &v, &kernel, &mut acc_a);
        frame.acceleration_of(b, &x, &v, &kernel, &mut acc_b);
        let diff = |u: &[f64], s: usize, r: usize| -> Vec<f64> {
            (0..d).map(|c| u[r * d + c] - u[s * d + c]).collect()
        };
        PairValue {
            f: diff(&x, a, b),
            df: diff(&v, a, b),
            ddf: (0..d).map(|c| acc_b[c] - acc_a[c]).collect(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpCheckReport {
    pub theta: f64,
    /// `∫ |f′|² |f|^(−θ) dt`.
    pub lhs: f64,
    /// `C₂ ∫ |f″| dt`.
    pub rhs_integral: f64,
    /// `𝓡(f, T) − 𝓡(f, 0)`.
    pub boundary: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub sup_norm: f64,
    pub slack: f64,
    pub satisfied: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-10,
        max_panels: 20_000,
    }
}

fn grid(signal: &dyn PairSignal) -> Vec<f64> {
    let (t0, t1) = signal.span();
    let mut g = vec![t0];
    g.extend(signal.breakpoints());
    g.push(t1);
    g
}

/// `𝓡(f, t) = (f·f′/|f|) H(|f|)` with `H(λ) = λ^(1−θ)/(1−θ)`, zero at `f = 0`.
fn remainder(p: &PairValue, theta: f64) -> f64 {
    let s = norm(&p.f);
    if s == 0.0 {
        return 0.0;
    }
    dot(&p.f, &p.df) * s.powf(-theta) / (1.0 - theta)
}

/// Sup norm of `f` over a fine scan of the window.
fn sup_norm(signal: &dyn PairSignal) -> f64 {
    let g = grid(signal);
    let mut best: f64 = 0.0;
    for w in g.windows(2) {
        for k in 0..=64 {
            let t = w[0] + (w[1] - w[0]) * k as f64 / 64.0;
            best = best.max(norm(&signal.eval(t).f));
        }
    }
    best
}

/// Checks `∫ |f′|² |f|^(−θ) ≤ C₂ ∫ |f″| + 𝓡(f,T) − 𝓡(f,0)` with
/// `C₂ = (‖f‖_∞ + 1)^(1−θ) / (1−θ)`.
///
/// Times where `f = 0` contribute nothing to the left side. The slack is
/// `1e−6` plus the quadrature error bounds.
///
/// ```
/// use csflock::diagnostics::{interpolation_check, AnalyticPair};
///
/// let f = AnalyticPair {
///     f: |t: f64| vec![t],
///     df: |_t: f64| vec![1.0],
///     ddf: |_t: f64| vec![0.0],
///     t0: 0.0, t1: 1.0, breaks: vec![],
/// };
/// let rep = interpolation_check(&f, 0.5).unwrap();
/// assert!((rep.lhs - 2.0).abs() < 1e-6);
/// assert!((rep.rhs_integral + rep.boundary - 2.0).abs() < 1e-6);
/// assert!(rep.satisfied);
/// ```
pub fn interpolation_check(
    signal: &dyn PairSignal,
    theta: f64,
) -> Result<InterpCheckReport, DiagnosticsError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(DiagnosticsError::Precondition(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    let g = grid(signal);
    let opts = quad_opts();
    let lhs = integrate_with_breaks(
        |t| {
            let p = signal.eval(t);
            let s = norm(&p.f);
            if s == 0.0 {
                0.0
            } else {
                dot(&p.df, &p.df) * s.powf(-theta)
            }
        },
        &g,
        &opts,
    );
    let ddf = integrate_with_breaks(|t| norm(&signal.eval(t).ddf), &g, &opts);
    if !lhs.converged || !ddf.converged {
        return Err(DiagnosticsError::InsufficientSampling(format!(
            "quadrature did not converge (errors {:e}, {:e})",
            lhs.error, ddf.error
        )));
    }
    let sup = sup_norm(signal);
    let c2 = (sup + 1.0).powf(1.0 - theta) / (1.0 - theta);
    let (t0, t1) = signal.span();
    let boundary = remainder(&signal.eval(t1), theta) - remainder(&signal.eval(t0), theta);
    let rhs_integral = c2 * ddf.value;
    let slack = 1e-6 + lhs.error + c2 * ddf.error;
    Ok(InterpCheckReport {
        theta,
        lhs: lhs.value,
        rhs_integral,
        boundary,
        c2,
        sup_norm: sup,
        slack,
        satisfied: lhs.value <= rhs_integral + boundary + slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub theta: f64,
    pub window: (f64, f64),
    pub value: f64,
    pub error: f64,
}

/// `∫_{s₁}^{s₂} |x_j − x_i|^(−θ) dt` across any collisions in the window.
///
/// The pair must stay in distinct clusters on the whole window. A quadrature
/// that fails to converge suggests a sticking that was classified as a
/// collision and yields `DivergenceSuspected`.
pub fn interval_integrability_check(
    pair: &TrajectoryPair<'_>,
    theta: f64,
) -> Result<IntegrabilityReport, DiagnosticsError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(DiagnosticsError::Precondition(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    let (s1, s2) = pair.span();
    if pair.merged_at(s2) {
        return Err(DiagnosticsError::Precondition(format!(
            "particles {} and {} are merged inside [{s1}, {s2}]",
            pair.i, pair.j
        )));
    }
    let g = grid(pair);
    let r = integrate_with_breaks(
        |t| {
            let s = norm(&pair.eval(t).f);
            if s == 0.0 {
                0.0
            } else {
                s.powf(-theta)
            }
        },
        &g,
        &quad_opts(),
    );
    if !r.converged || !r.value.is_finite() {
        return Err(DiagnosticsError::DivergenceSuspected(format!(
            "no convergence for pair ({}, {}) on [{s1}, {s2}]: value {:e}, error {:e}",
            pair.i, pair.j, r.value, r.error
        )));
    }
    Ok(IntegrabilityReport {
        theta,
        window: (s1, s2),
        value: r.value,
        error: r.error,
    })
}

/// Exponent for pair checks tied to the kernel exponent:
/// `θ = α (2 − 2δ) / (1 − 2δ)` with `δ = min(0.05, (1 − 2α)/(4 − 4α))`,
/// which keeps `θ < 1`. `None` unless `0 < α < 1/2`.
pub fn auto_theta(alpha: f64) -> Option<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return None;
    }
    let delta = 0.05f64.min((1.0 - 2.0 * alpha) / (4.0 - 4.0 * alpha));
    Some(alpha * (2.0 - 2.0 * delta) / (1.0 - 2.0 * delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal() {
        let s = AnalyticPair {
            f: |_t: f64| vec![0.7, -0.2],
            df: |_t: f64| vec![0.0, 0.0],
            ddf: |_t: f64| vec![0.0, 0.0],
            t0: 0.0,
            t1: 3.0,
            breaks: vec![],
        };
        let r = interpolation_check(&s, 0.3).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.boundary, 0.0);
        assert!(r.satisfied);
    }

    #[test]
    fn linear_signal_is_tight() {
        for theta in [0.3, 0.5, 0.7] {
            let s = AnalyticPair {
                f: |t: f64| vec![t],
                df: |_t: f64| vec![1.0],
                ddf: |_t: f64| vec![0.0],
                t0: 0.0,
                t1: 1.0,
                breaks: vec![],
            };
            let r = interpolation_check(&s, theta).unwrap();
            let exact = 1.0 / (1.0 - theta);
            assert!((r.lhs - exact).abs() < 1e-7, "{theta}: {}", r.lhs);
            assert!((r.boundary - exact).abs() < 1e-12);
            assert!(r.satisfied);
        }
    }

    #[test]
    fn crossing_parabola_with_interior_zero() {
        // f = t² − 1/4 on [0, 1] vanishes at 1/2.
        let s = AnalyticPair {
            f: |t: f64| vec![t * t - 0.25],
            df: |t: f64| vec![2.0 * t],
            ddf: |_t: f64| vec![2.0],
            t0: 0.0,
            t1: 1.0,
            breaks: vec![0.5],
        };
        for theta in [0.3, 0.5, 0.7] {
            let r = interpolation_check(&s, theta).unwrap();
            assert!(r.satisfied, "{r:?}");
            assert!(r.lhs.is_finite() && r.lhs > 0.0);
        }
    }

    #[test]
    fn rejects_bad_theta() {
        let s = AnalyticPair {
            f: |t: f64| vec![t],
            df: |_t: f64| vec![1.0],
            ddf: |_t: f64| vec![0.0],
            t0: 0.0,
            t1: 1.0,
            breaks: vec![],
        };
        assert!(interpolation_check(&s, 1.0).is_err());
        assert!(interpolation_check(&s, 0.0).is_err());
    }

    #[test]
    fn auto_theta_stays_below_one() {
        for k in 1..50 {
            let a = 0.01 * k as f64;
            let th = auto_theta(a).unwrap();
            assert!(th > 2.0 * a * 0.99 && th < 1.0, "alpha {a}: theta {th}");
        }
        assert!(auto_theta(0.5).is_none());
        assert!(auto_theta(0.7).is_none());
        // δ = 0.05 for small α: θ = α · 1.9 / 0.9.
        assert!((auto_theta(0.1).unwrap() - 0.1 * 1.9 / 0.9).abs() < 1e-15);
    }
}
