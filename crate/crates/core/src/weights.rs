//! Communication weights.
//!
//! Two families are supported: the singular power law `ψ(s) = s^(-α)` and the
//! classic bounded Cucker-Smale weight `ψ(s) = K / (1 + s²)^(β/2)`. A kernel may
//! carry a regularization floor `ε`; when it is positive the kernel evaluates
//! `ψ(max(s, ε))`, which keeps the stepper finite at coincident positions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{self, QuadOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Value of a weight that may be infinite at a coincidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Finite(f64),
    Infinite,
}

impl Weight {
    pub fn is_infinite(self) -> bool {
        matches!(self, Weight::Infinite)
    }

    /// Collapses to an `f64`, mapping the sentinel to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            Weight::Finite(x) => x,
            Weight::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Weight::Finite(x) => Some(x),
            Weight::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelKind {
    Singular {
        alpha: f64,
    },
    CuckerSmale {
        #[serde(rename = "K")]
        k: f64,
        beta: f64,
    },
}

/// Which part of the theory backs a given kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Bounded Lipschitz weight; classical well-posedness.
    Smooth,
    /// `0 < α < 1/2`: absolutely continuous velocities, uniqueness in `W^{2,1}`.
    WeaklySingular,
    /// `1/2 ≤ α < 1`: piecewise weak solutions, unique, no `W^{2,1}` claim.
    Integrable,
    /// `α ≥ 1`: the kernel is not integrable at the origin; evaluated, not certified.
    NonIntegrable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightKernel {
    kind: KernelKind,
    floor: f64,
}

impl WeightKernel {
    pub fn singular(alpha: f64) -> Result<Self, WeightError> {
        Self::new(KernelKind::Singular { alpha }, 0.0)
    }

    pub fn cucker_smale(k: f64, beta: f64) -> Result<Self, WeightError> {
        Self::new(KernelKind::CuckerSmale { k, beta }, 0.0)
    }

    pub fn new(kind: KernelKind, floor: f64) -> Result<Self, WeightError> {
        match kind {
            KernelKind::Singular { alpha } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return Err(WeightError::InvalidParameter(format!(
                        "alpha must be positive and finite, got {alpha}"
                    )));
                }
            }
            KernelKind::CuckerSmale { k, beta } => {
                if !(k.is_finite() && k > 0.0) {
                    return Err(WeightError::InvalidParameter(format!(
                        "K must be positive and finite, got {k}"
                    )));
                }
                if !(beta.is_finite() && beta >= 0.0) {
                    return Err(WeightError::InvalidParameter(format!(
                        "beta must be nonnegative and finite, got {beta}"
                    )));
                }
            }
        }
        if !(floor.is_finite() && floor >= 0.0) {
            return Err(WeightError::InvalidParameter(format!(
                "floor must be nonnegative and finite, got {floor}"
            )));
        }
        Ok(Self { kind, floor })
    }

    pub fn with_floor(self, floor: f64) -> Result<Self, WeightError> {
        Self::new(self.kind, floor)
    }

    /// The same kernel without regularization.
    pub fn raw(self) -> Self {
        Self {
            kind: self.kind,
            floor: 0.0,
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Singular { alpha } => Some(alpha),
            KernelKind::CuckerSmale { .. } => None,
        }
    }

    pub fn regime(&self) -> Regime {
        match self.kind {
            KernelKind::CuckerSmale { .. } => Regime::Smooth,
            KernelKind::Singular { alpha } if alpha < 0.5 => Regime::WeaklySingular,
            KernelKind::Singular { alpha } if alpha < 1.0 => Regime::Integrable,
            KernelKind::Singular { .. } => Regime::NonIntegrable,
        }
    }

    /// `ψ(s)`, with the infinite sentinel for the raw singular kernel at `s = 0`.
    pub fn eval(&self, s: f64) -> Result<Weight, WeightError> {
        if !(s >= 0.0) {
            return Err(WeightError::InvalidParameter(format!(
                "distance must be nonnegative, got {s}"
            )));
        }
        let v = self.eval_unchecked(s);
        Ok(if v.is_infinite() {
            Weight::Infinite
        } else {
            Weight::Finite(v)
        })
    }

    /// Hot-path evaluation; `s` must be nonnegative. Returns `f64::INFINITY` for the
    /// raw singular kernel at `s = 0`.
    #[inline]
    pub fn eval_unchecked(&self, s: f64) -> f64 {
        let s = s.max(self.floor);
        match self.kind {
            KernelKind::Singular { alpha } => {
                if s == 0.0 {
                    f64::INFINITY
                } else if alpha == 0.5 {
                    1.0 / s.sqrt()
                } else {
                    s.powf(-alpha)
                }
            }
            KernelKind::CuckerSmale { k, beta } => {
                if beta == 0.0 {
                    k
                } else {
                    k * (1.0 + s * s).powf(-0.5 * beta)
                }
            }
        }
    }

    /// `Ψ(s) = s^(1-α)/(1-α)`, the primitive of the raw singular weight with
    /// `Ψ(0) = 0`. Only defined for the singular kernel with `α < 1`.
    pub fn primitive(&self, s: f64) -> Result<f64, WeightError> {
        let alpha = match self.kind {
            KernelKind::Singular { alpha } => alpha,
            KernelKind::CuckerSmale { .. } => {
                return Err(WeightError::Unsupported(
                    "primitive is only provided for the singular kernel".into(),
                ))
            }
        };
        if alpha >= 1.0 {
            return Err(WeightError::Unsupported(format!(
                "primitive diverges at the origin for alpha = {alpha} >= 1"
            )));
        }
        if !(s >= 0.0) {
            return Err(WeightError::InvalidParameter(format!(
                "distance must be nonnegative, got {s}"
            )));
        }
        Ok(power_primitive(alpha, s))
    }

    /// `∫₀ˢ ψ(max(σ, ε)) dσ` for this kernel's floor `ε`.
    ///
    /// For the raw kernel this is the capture function of the local two-body
    /// first integral: an approaching pair at distance `s` sticks when its
    /// closing speed does not exceed `κ Ψ(s)`. Infinite for the raw singular
    /// kernel with `α ≥ 1`.
    pub fn floored_primitive(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        let eps = self.floor;
        match self.kind {
            KernelKind::Singular { alpha } => {
                if s <= eps {
                    return s * eps.powf(-alpha);
                }
                let head = if eps > 0.0 { eps.powf(1.0 - alpha) } else { 0.0 };
                if alpha < 1.0 {
                    head + power_primitive(alpha, s) - power_primitive(alpha, eps)
                } else if eps == 0.0 {
                    f64::INFINITY
                } else if alpha == 1.0 {
                    head + (s / eps).ln()
                } else {
                    head + (eps.powf(1.0 - alpha) - s.powf(1.0 - alpha)) / (alpha - 1.0)
                }
            }
            KernelKind::CuckerSmale { k, beta } => {
                if beta == 0.0 || s == 0.0 {
                    return k * s;
                }
                let head = k * (1.0 + eps * eps).powf(-0.5 * beta) * eps.min(s);
                if s <= eps {
                    return head;
                }
                let opts = QuadOptions {
                    abs_tol: 1e-14 * k * s,
                    rel_tol: 1e-12,
                    ..QuadOptions::default()
                };
                let tail = quadrature::integrate(|x| self.eval_unchecked(x), eps, s, &opts);
                head + tail.value
            }
        }
    }
}

#[inline]
fn power_primitive(alpha: f64, s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.powf(1.0 - alpha) / (1.0 - alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let k = WeightKernel::singular(0.3).unwrap();
        assert_eq!(k.eval(1.0).unwrap(), Weight::Finite(1.0));
        let k = WeightKernel::singular(0.5).unwrap();
        assert_eq!(k.eval(4.0).unwrap(), Weight::Finite(0.5));
        assert_eq!(k.eval(0.0).unwrap(), Weight::Infinite);
        let k = WeightKernel::cucker_smale(1.0, 2.0).unwrap();
        assert_eq!(k.eval(0.0).unwrap(), Weight::Finite(1.0));
        let k = WeightKernel::singular(0.5).unwrap().with_floor(0.01).unwrap();
        let v = k.eval(0.0).unwrap().to_f64();
        assert!((v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn primitive_examples() {
        let k = WeightKernel::singular(0.5).unwrap();
        assert!((k.primitive(4.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((k.primitive(1.0).unwrap() - 2.0).abs() < 1e-14);
        for a in [0.1, 0.45, 0.9] {
            assert_eq!(WeightKernel::singular(a).unwrap().primitive(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn invalid_parameters_fail_fast() {
        assert!(WeightKernel::singular(-1.0).is_err());
        assert!(WeightKernel::singular(0.0).is_err());
        assert!(WeightKernel::singular(f64::NAN).is_err());
        assert!(WeightKernel::cucker_smale(0.0, 1.0).is_err());
        assert!(WeightKernel::cucker_smale(1.0, -0.5).is_err());
        assert!(WeightKernel::singular(0.5).unwrap().with_floor(-1.0).is_err());
        let k = WeightKernel::singular(0.5).unwrap();
        assert!(matches!(k.eval(-1.0), Err(WeightError::InvalidParameter(_))));
    }

    #[test]
    fn primitive_unsupported() {
        let cs = WeightKernel::cucker_smale(1.0, 1.0).unwrap();
        assert!(matches!(cs.primitive(1.0), Err(WeightError::Unsupported(_))));
        let hard = WeightKernel::singular(1.5).unwrap();
        assert!(matches!(hard.primitive(1.0), Err(WeightError::Unsupported(_))));
    }

    #[test]
    fn primitive_derivative_matches_eval() {
        for alpha in [0.1, 0.3, 0.5, 0.8] {
            let k = WeightKernel::singular(alpha).unwrap();
            for i in 0..=24 {
                let s = 10f64.powf(-4.0 + 6.0 * i as f64 / 24.0);
                let h = s * 1e-5;
                let d = (k.primitive(s + h).unwrap() - k.primitive(s - h).unwrap()) / (2.0 * h);
                let psi = k.eval_unchecked(s);
                assert!(((d - psi) / psi).abs() < 1e-6, "alpha {alpha} s {s}: {d} vs {psi}");
            }
        }
    }

    #[test]
    fn floored_agrees_with_raw_above_floor() {
        let raw = WeightKernel::singular(0.4).unwrap();
        let floored = raw.with_floor(1e-3).unwrap();
        for s in [1e-3, 2e-3, 0.1, 1.0, 17.0] {
            assert_eq!(raw.eval_unchecked(s), floored.eval_unchecked(s));
        }
    }

    #[test]
    fn floored_primitive_reduces_to_primitive() {
        let raw = WeightKernel::singular(0.5).unwrap();
        assert_eq!(raw.floored_primitive(4.0), 4.0);
        let eps = 1e-4;
        let f = raw.with_floor(eps).unwrap();
        // Ψ_ε(s) = Ψ(s) - ε^(1-α)·α/(1-α) above the floor.
        let expect = 4.0 - eps.sqrt();
        assert!((f.floored_primitive(4.0) - expect).abs() < 1e-12);
        assert!((f.floored_primitive(eps / 2.0) - 0.5 * eps.sqrt()).abs() < 1e-15);
        let cs = WeightKernel::cucker_smale(2.0, 2.0).unwrap();
        // K·atan(s) for β = 2.
        assert!((cs.floored_primitive(1.0) - 2.0 * 1f64.atan()).abs() < 1e-10);
    }

    #[test]
    fn regimes() {
        assert_eq!(WeightKernel::singular(0.3).unwrap().regime(), Regime::WeaklySingular);
        assert_eq!(WeightKernel::singular(0.5).unwrap().regime(), Regime::Integrable);
        assert_eq!(WeightKernel::singular(1.0).unwrap().regime(), Regime::NonIntegrable);
        assert_eq!(WeightKernel::cucker_smale(1.0, 0.0).unwrap().regime(), Regime::Smooth);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn eval_nonincreasing(alpha in 0.01f64..2.0, s1 in 1e-6f64..1e3, ds in 0.0f64..1e3, floor in 0.0f64..1e-2) {
                let k = WeightKernel::singular(alpha).unwrap().with_floor(floor).unwrap();
                let s2 = s1 + ds;
                prop_assert!(k.eval_unchecked(s1) >= k.eval_unchecked(s2));
                if ds > 0.0 && s1 > floor {
                    prop_assert!(k.eval_unchecked(s1) > k.eval_unchecked(s2));
                }
            }

            #[test]
            fn cucker_smale_nonincreasing(kk in 0.1f64..10.0, beta in 0.0f64..4.0, s1 in 0.0f64..1e3, ds in 0.0f64..1e3) {
                let k = WeightKernel::cucker_smale(kk, beta).unwrap();
                prop_assert!(k.eval_unchecked(s1) >= k.eval_unchecked(s1 + ds));
            }
        }
    }
}
