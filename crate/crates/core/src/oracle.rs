//! Reference solutions of the two-particle problem in one dimension.
//!
//! With `N = 2` and `1/N` coupling the relative coordinates `w = x₂ − x₁`,
//! `u = v₂ − v₁` obey
//!
//! ```text
//! w' = u,    u' = −u ψ(|w|),    ψ(s) = s^(−α),
//! ```
//!
//! so `du/dw = −ψ(|w|)` and `u + Φ(w)` is conserved, with `Φ(w) = sgn(w) Ψ(|w|)`
//! and `Ψ(s) = s^(1−α)/(1−α)`. For an approaching pair (`w > 0`, `u < 0`) the
//! sign of `E = u + Ψ(w)` decides everything: the pair crosses with impact
//! speed `|E|` when `E < 0`, sticks in finite time when `E = 0`, and approaches
//! the separation `Ψ⁻¹(E)` when `E > 0`.
//!
//! Times are obtained by quadrature of `dt = dw/|u(w)|`, or of
//! `dt = −d(ln|u|)/ψ(|w|)` on legs that stall, and positions by inverting
//! those maps with bisection, so nothing here shares code with the
//! time stepper.
//!
//! ```
//! use csflock::oracle::{classify, OutcomeClass, TwoBodyState};
//!
//! let out = classify(&TwoBodyState::new(1.0, -2.0, 0.5).unwrap()).unwrap();
//! assert_eq!(out.class, OutcomeClass::ExactSticking);
//! assert!((out.t_event.unwrap() - 1.0).abs() < 1e-12);
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{integrate, QuadOptions};
use crate::weights::WeightKernel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("outside the oracle's domain: {0}")]
    OutOfDomain(String),
    #[error("reference integration failed: {0}")]
    Integration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBodyState {
    pub w: f64,
    pub u: f64,
    pub alpha: f64,
}

impl TwoBodyState {
    pub fn new(w: f64, u: f64, alpha: f64) -> Result<Self, OracleError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(OracleError::OutOfDomain(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if !(w.is_finite() && u.is_finite()) {
            return Err(OracleError::OutOfDomain("non-finite state".into()));
        }
        Ok(Self { w, u, alpha })
    }

    /// `Ψ(s) = s^(1−α)/(1−α)`.
    pub fn psi_primitive(&self, s: f64) -> f64 {
        s.powf(1.0 - self.alpha) / (1.0 - self.alpha)
    }

    /// `Ψ⁻¹(y) = ((1−α) y)^(1/(1−α))`.
    pub fn psi_primitive_inv(&self, y: f64) -> f64 {
        ((1.0 - self.alpha) * y).powf(1.0 / (1.0 - self.alpha))
    }

    /// The conserved quantity `u + Φ(w)`.
    pub fn first_integral(&self) -> f64 {
        self.u + self.w.signum() * self.psi_primitive(self.w.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeClass {
    Crossing,
    ExactSticking,
    AsymptoticApproach,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBodyOutcome {
    pub class: OutcomeClass,
    pub energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_event: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub impact_speed: Option<f64>,
    /// Limiting separation: reached asymptotically before contact, or after
    /// crossing on the far side.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_limit: Option<f64>,
}

fn quad_opts(tol: f64) -> QuadOptions {
    QuadOptions {
        abs_tol: tol,
        rel_tol: tol,
        max_panels: 20_000,
    }
}

/// Relative size below which `E` counts as zero.
const CRITICAL_RTOL: f64 = 1e-14;

fn is_critical(s: &TwoBodyState, e: f64) -> bool {
    e.abs() <= CRITICAL_RTOL * (s.u.abs() + s.psi_primitive(s.w.abs()))
}

/// Classifies an approaching pair (`w > 0`, `u < 0`).
pub fn classify(init: &TwoBodyState) -> Result<TwoBodyOutcome, OracleError> {
    if !(init.w > 0.0 && init.u < 0.0) {
        return Err(OracleError::OutOfDomain(format!(
            "classify needs w > 0 and u < 0, got w = {}, u = {}",
            init.w, init.u
        )));
    }
    let e = init.u + init.psi_primitive(init.w);
    if is_critical(init, e) {
        let a = init.alpha;
        return Ok(TwoBodyOutcome {
            class: OutcomeClass::ExactSticking,
            energy: 0.0,
            t_event: Some((1.0 - a) * init.w.powf(a) / a),
            impact_speed: None,
            w_limit: None,
        });
    }
    if e > 0.0 {
        return Ok(TwoBodyOutcome {
            class: OutcomeClass::AsymptoticApproach,
            energy: e,
            t_event: None,
            impact_speed: None,
            w_limit: Some(init.psi_primitive_inv(e)),
        });
    }
    Ok(TwoBodyOutcome {
        class: OutcomeClass::Crossing,
        energy: e,
        t_event: Some(crossing_time(init, e, 1e-14)?),
        impact_speed: Some(-e),
        w_limit: Some(init.psi_primitive_inv(-e)),
    })
}

/// `∫₀^{w₀} dw / (Ψ(w) + |E|)`.
fn crossing_time(s: &TwoBodyState, e: f64, tol: f64) -> Result<f64, OracleError> {
    let r = integrate(|w| 1.0 / (s.psi_primitive(w) + e.abs()), 0.0, s.w, &quad_opts(tol));
    if !r.converged {
        return Err(OracleError::Integration(format!(
            "crossing time quadrature did not converge (error {:e})",
            r.error
        )));
    }
    Ok(r.value)
}

/// Motion on the half-line `w ≥ 0` with `|u| = g(w)`, either toward zero
/// (`inward`) or away from it.
struct Leg<'a> {
    state: &'a TwoBodyState,
    inward: bool,
    /// `u + Ψ(w)` for inward legs and `u − Ψ(w)` sign-adjusted for outward ones;
    /// see `speed`.
    e: f64,
    w_start: f64,
    /// End of the leg: where `|u|` vanishes or the origin.
    w_end: f64,
    tol: f64,
}

impl Leg<'_> {
    fn speed(&self, w: f64) -> f64 {
        let p = self.state.psi_primitive(w);
        if self.inward {
            p - self.e
        } else {
            self.e - p
        }
    }

    /// Time to travel from `w_start` to `w`.
    fn time_to(&self, w: f64) -> Result<f64, OracleError> {
        let (a, b) = if w < self.w_start {
            (w, self.w_start)
        } else {
            (self.w_start, w)
        };
        if a == b {
            return Ok(0.0);
        }
        let r = integrate(|x| 1.0 / self.speed(x), a, b, &quad_opts(self.tol));
        if !r.value.is_finite() {
            return Err(OracleError::Integration("non-finite travel time".into()));
        }
        Ok(r.value)
    }

    /// Duration of the whole leg (`∞` when it ends where `|u| = 0`).
    fn duration(&self) -> Result<f64, OracleError> {
        if self.speed(self.w_end) > 0.0 {
            self.time_to(self.w_end)
        } else {
            Ok(f64::INFINITY)
        }
    }

    /// Position and speed after time `t` on the leg, by bisection on the
    /// travel time.
    fn state_at(&self, t: f64) -> Result<(f64, f64), OracleError> {
        if self.speed(self.w_end) <= 0.0 {
            return self.position_by_log_speed(t);
        }
        let (mut near, mut far) = (self.w_start, self.w_end);
        for _ in 0..200 {
            let mid = 0.5 * (near + far);
            if mid == near || mid == far || (far - near).abs() <= self.tol * self.w_start.max(self.w_end).max(1e-300) * 1e-2 {
                break;
            }
            if self.time_to(mid)? < t {
                near = mid;
            } else {
                far = mid;
            }
        }
        let w = 0.5 * (near + far);
        Ok((w, self.speed(w)))
    }

    /// Position on the leg where `ln |u| = s`.
    fn position_at_log_speed(&self, s: f64) -> f64 {
        let y = if self.inward { self.e + s.exp() } else { self.e - s.exp() };
        self.state.psi_primitive_inv(y.max(0.0))
    }

    /// Legs that stall where `|u|` vanishes. `d ln|u| / dt = −ψ(w)` holds on
    /// every leg, so the travel time is `∫ w^α d(ln|u|)` with a smooth
    /// integrand. In `w` the integrand `1/|u|` cancels catastrophically near
    /// the stalling point.
    fn position_by_log_speed(&self, t: f64) -> Result<(f64, f64), OracleError> {
        let u0 = self.speed(self.w_start);
        if !(u0 > 0.0) || t <= 0.0 {
            return Ok((self.w_start, u0.max(0.0)));
        }
        let a = self.state.alpha;
        let s0 = u0.ln();
        let travel = |s: f64| -> Result<f64, OracleError> {
            let r = integrate(
                |x| self.position_at_log_speed(x).powf(a),
                s,
                s0,
                &quad_opts(self.tol),
            );
            if r.converged && r.value.is_finite() {
                Ok(r.value)
            } else {
                Err(OracleError::Integration(format!(
                    "travel time quadrature did not converge (error {:e})",
                    r.error
                )))
            }
        };
        // w^α never exceeds this, so the travel time grows at most this fast.
        let slope = self.w_start.max(self.w_end).powf(a);
        let mut gap = t / slope + 1.0;
        while travel(s0 - gap)? < t {
            gap *= 2.0;
        }
        let (mut near, mut far) = (s0, s0 - gap);
        for _ in 0..200 {
            let mid = 0.5 * (near + far);
            if mid == near || mid == far || (near - far) <= self.tol * (1.0 + mid.abs()) {
                break;
            }
            if travel(mid)? < t {
                near = mid;
            } else {
                far = mid;
            }
        }
        let s = 0.5 * (near + far);
        Ok((self.position_at_log_speed(s), s.exp()))
    }
}

/// `(w(t), u(t))` for any initial state, including the continuation through
/// a crossing and the stuck state after an exact sticking.
///
/// `tol` sets the quadrature and bisection tolerances.
pub fn solve_reduced(init: &TwoBodyState, t: f64, tol: f64) -> Result<(f64, f64), OracleError> {
    if !(t >= 0.0 && tol > 0.0) {
        return Err(OracleError::OutOfDomain(format!(
            "need t >= 0 and tol > 0, got t = {t}, tol = {tol}"
        )));
    }
    // The problem is symmetric under (w, u) → (−w, −u).
    if init.w < 0.0 || (init.w == 0.0 && init.u < 0.0) {
        let mirrored = TwoBodyState {
            w: -init.w,
            u: -init.u,
            ..*init
        };
        let (w, u) = solve_reduced(&mirrored, t, tol)?;
        return Ok((-w, -u));
    }
    let s = init;
    if s.u == 0.0 || t == 0.0 {
        return Ok((s.w, s.u));
    }
    let tol = tol.max(1e-15);
    if s.u > 0.0 {
        // Separating: u − (E − Ψ(w)) = 0 with E = u + Ψ(w) > 0.
        let e = s.u + s.psi_primitive(s.w);
        let leg = Leg {
            state: s,
            inward: false,
            e,
            w_start: s.w,
            w_end: s.psi_primitive_inv(e),
            tol,
        };
        return leg.state_at(t);
    }
    let e = s.u + s.psi_primitive(s.w);
    if is_critical(s, e) {
        let a = s.alpha;
        let base = s.w.powf(a) - a * t / (1.0 - a);
        if base <= 0.0 {
            return Ok((0.0, 0.0));
        }
        let w = base.powf(1.0 / a);
        return Ok((w, -s.psi_primitive(w)));
    }
    let inward = Leg {
        state: s,
        inward: true,
        e,
        w_start: s.w,
        w_end: if e > 0.0 { s.psi_primitive_inv(e) } else { 0.0 },
        tol,
    };
    let t_in = inward.duration()?;
    if t < t_in {
        let (w, speed) = inward.state_at(t)?;
        return Ok((w, -speed));
    }
    // Crossed at t_in with speed |E|; continue on the negative side.
    let outward = Leg {
        state: s,
        inward: false,
        e: -e,
        w_start: 0.0,
        w_end: s.psi_primitive_inv(-e),
        tol,
    };
    let (w, speed) = outward.state_at(t - t_in)?;
    Ok((-w, -speed))
}

/// `∫_{t₁}^{t₂} |w(t)|^(−θ) dt` along the reduced solution, computed in the
/// `w` variable as `∫ |w|^(−θ) / |u(w)| dw` over each monotone leg.
pub fn inverse_power_integral(
    init: &TwoBodyState,
    theta: f64,
    t1: f64,
    t2: f64,
    tol: f64,
) -> Result<f64, OracleError> {
    if !(theta > 0.0 && theta < 1.0 && t2 >= t1 && t1 >= 0.0) {
        return Err(OracleError::OutOfDomain(format!(
            "need 0 < theta < 1 and 0 <= t1 <= t2, got {theta}, {t1}, {t2}"
        )));
    }
    if !(init.w > 0.0 && init.u < 0.0) {
        return Err(OracleError::OutOfDomain(
            "inverse_power_integral needs an approaching pair with w > 0".into(),
        ));
    }
    let out = classify(init)?;
    if out.class == OutcomeClass::ExactSticking && t2 >= out.t_event.unwrap_or(f64::INFINITY) {
        return Err(OracleError::OutOfDomain(
            "window reaches the sticking time; the integral diverges".into(),
        ));
    }
    let (w1, _) = solve_reduced(init, t1, tol)?;
    let (w2, _) = solve_reduced(init, t2, tol)?;
    let e = out.energy;
    let psi = |w: f64| init.psi_primitive(w);
    let opts = quad_opts(tol);
    let f_in = |w: f64| w.powf(-theta) / (psi(w) - e);
    let f_out = |w: f64| w.powf(-theta) / (-e - psi(w));
    let value = match (w1 >= 0.0, w2 >= 0.0) {
        (true, true) => integrate(f_in, w2, w1, &opts).value,
        (true, false) => {
            integrate(f_in, 0.0, w1, &opts).value + integrate(f_out, 0.0, -w2, &opts).value
        }
        (false, false) => integrate(f_out, -w1, -w2, &opts).value,
        (false, true) => unreachable!("a crossing pair does not return"),
    };
    Ok(value)
}

/// Largest drift of `u + κ Φ(w)` along samples `(w, u)` relative to
/// `|u(0)| + κ Ψ(|w(0)|)`, with `Φ(w) = sgn(w) Ψ_ε(|w|)` from the kernel's
/// floored primitive.
///
/// The samples must come from one interval without merges and `u` must keep
/// its sign.
pub fn first_integral_residual(
    samples: &[(f64, f64)],
    kernel: &WeightKernel,
    kappa: f64,
) -> Result<f64, OracleError> {
    let Some(&(w0, u0)) = samples.first() else {
        return Ok(0.0);
    };
    if samples.iter().any(|&(_, u)| u * u0 < 0.0) {
        return Err(OracleError::OutOfDomain(
            "relative velocity changes sign inside the segment".into(),
        ));
    }
    let phi = |w: f64| w.signum() * kernel.floored_primitive(w.abs());
    let i0 = u0 + kappa * phi(w0);
    let scale = u0.abs() + kappa * kernel.floored_primitive(w0.abs());
    if scale == 0.0 {
        return Ok(0.0);
    }
    let worst = samples
        .iter()
        .map(|&(w, u)| (u + kappa * phi(w) - i0).abs())
        .fold(0.0, f64::max);
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn st(w: f64, u: f64, a: f64) -> TwoBodyState {
        TwoBodyState::new(w, u, a).unwrap()
    }

    #[test]
    fn late_speed_decays_at_the_limit_rate() {
        // After crossing, w → −1/4 and ln|u| falls at rate ψ(1/4) = 2.
        let s = st(1.0, -3.0, 0.5);
        let (w1, u1) = solve_reduced(&s, 20.0, 1e-12).unwrap();
        let (w2, u2) = solve_reduced(&s, 40.0, 1e-12).unwrap();
        assert_relative_eq!(w1, -0.25, epsilon = 1e-12);
        assert_eq!(w2, -0.25);
        assert!(u1 < 0.0 && u2 < 0.0);
        assert_relative_eq!((u1 / u2).ln() / 20.0, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn trichotomy_examples() {
        let c = classify(&st(1.0, -2.0, 0.5)).unwrap();
        assert_eq!(c.class, OutcomeClass::ExactSticking);
        assert_relative_eq!(c.t_event.unwrap(), 1.0, epsilon = 1e-15);

        let a = classify(&st(1.0, -1.0, 0.5)).unwrap();
        assert_eq!(a.class, OutcomeClass::AsymptoticApproach);
        assert_relative_eq!(a.w_limit.unwrap(), 0.25, epsilon = 1e-15);
        assert!(a.t_event.is_none() && a.impact_speed.is_none());

        let x = classify(&st(1.0, -3.0, 0.5)).unwrap();
        assert_eq!(x.class, OutcomeClass::Crossing);
        assert_relative_eq!(x.impact_speed.unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(x.w_limit.unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn crossing_time_closed_form_at_half() {
        // α = 1/2, E = −1: ∫₀¹ dw / (2√w + 1) = 1 − ln(3)/2.
        let x = classify(&st(1.0, -3.0, 0.5)).unwrap();
        assert_relative_eq!(x.t_event.unwrap(), 1.0 - 0.5 * 3f64.ln(), epsilon = 1e-13);
    }

    #[test]
    fn rejects_outside_domain() {
        assert!(TwoBodyState::new(1.0, -1.0, 1.0).is_err());
        assert!(classify(&st(1.0, 0.5, 0.3)).is_err());
        assert!(classify(&st(-1.0, -0.5, 0.3)).is_err());
    }

    #[test]
    fn sticking_time_scales_like_w_to_alpha() {
        let a = 0.3;
        let base = classify(&st(1.0, -st(1.0, 0.0, a).psi_primitive(1.0), a))
            .unwrap()
            .t_event
            .unwrap();
        for lam in [0.5, 1.0, 2.0, 4.0] {
            let s0 = st(lam, 0.0, a);
            let t = classify(&st(lam, -s0.psi_primitive(lam), a))
                .unwrap()
                .t_event
                .unwrap();
            assert_relative_eq!(t / base, f64::powf(lam, a), epsilon = 1e-13);
        }
    }

    #[test]
    fn fixed_point_and_stuck_state() {
        assert_eq!(solve_reduced(&st(0.7, 0.0, 0.4), 5.0, 1e-12).unwrap(), (0.7, 0.0));
        assert_eq!(solve_reduced(&st(1.0, -2.0, 0.5), 1.5, 1e-12).unwrap(), (0.0, 0.0));
        let (w, u) = solve_reduced(&st(1.0, -2.0, 0.5), 0.5, 1e-12).unwrap();
        // w(t) = (1 − t)² for α = 1/2.
        assert_relative_eq!(w, 0.25, epsilon = 1e-15);
        assert_relative_eq!(u, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn solution_preserves_first_integral() {
        for &(w0, u0, a) in &[(1.0, -3.0, 0.5), (1.0, -1.0, 0.5), (0.5, 0.7, 0.2), (2.0, -3.0, 0.1)] {
            let s = st(w0, u0, a);
            let e0 = s.first_integral();
            for t in [0.1, 0.7, 1.3, 4.0] {
                let (w, u) = solve_reduced(&s, t, 1e-12).unwrap();
                let e = st(w, u, a).first_integral();
                assert!((e - e0).abs() < 1e-9, "({w0},{u0},{a}) t={t}: {e} vs {e0}");
            }
        }
    }

    #[test]
    fn crossing_continues_to_far_limit() {
        let s = st(1.0, -3.0, 0.5);
        let t_c = classify(&s).unwrap().t_event.unwrap();
        let (w, u) = solve_reduced(&s, t_c, 1e-12).unwrap();
        assert!(w.abs() < 1e-9 && (u + 1.0).abs() < 1e-6);
        let (w, u) = solve_reduced(&s, 60.0, 1e-12).unwrap();
        assert!(w < 0.0 && (w + 0.25).abs() < 1e-6 && u.abs() < 1e-3, "{w} {u}");
        // Mirror image.
        let (wm, um) = solve_reduced(&st(-1.0, 3.0, 0.5), 0.5, 1e-12).unwrap();
        let (wp, up) = solve_reduced(&s, 0.5, 1e-12).unwrap();
        assert_eq!((wm, um), (-wp, -up));
    }

    #[test]
    fn solve_matches_classified_crossing_time() {
        let s = st(2.0, -3.0, 0.45);
        let t_c = classify(&s).unwrap().t_event.unwrap();
        let (before, _) = solve_reduced(&s, t_c * (1.0 - 1e-6), 1e-13).unwrap();
        let (after, _) = solve_reduced(&s, t_c * (1.0 + 1e-6), 1e-13).unwrap();
        assert!(before > 0.0 && after < 0.0);
    }

    #[test]
    fn inverse_power_integral_unit_weight_limit() {
        // As α → 0 the weight tends to one and w(t) = e^(−t) for w0 = 1,
        // u0 = −1, so ∫₀^½ w^(−½) dt = 2(e^¼ − 1).
        let s = st(1.0, -1.0, 1e-6);
        let got = inverse_power_integral(&s, 0.5, 0.0, 0.5, 1e-12).unwrap();
        let limit = 2.0 * (0.25f64.exp() - 1.0);
        assert!((got - limit).abs() < 1e-4, "{got} vs {limit}");
    }

    #[test]
    fn first_integral_residual_of_exact_samples() {
        let s = st(1.0, -3.0, 0.5);
        let k = WeightKernel::singular(0.5).unwrap();
        let samples: Vec<(f64, f64)> = (0..20)
            .map(|k| solve_reduced(&s, 0.02 * k as f64, 1e-13).unwrap())
            .collect();
        assert!(first_integral_residual(&samples, &k, 1.0).unwrap() < 1e-10);
        let flat = [(1.0, 0.0), (1.0, 0.0)];
        assert_eq!(first_integral_residual(&flat, &k, 1.0).unwrap(), 0.0);
        let turning = [(1.0, -1.0), (0.5, 0.2)];
        assert!(first_integral_residual(&turning, &k, 1.0).is_err());
    }
}
