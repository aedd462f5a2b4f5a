use serde::{Deserialize, Serialize};

use super::IntegratorError;

/// Error-control and event-classification tolerances.
///
/// Event tolerances are absolute: `eps_x` is a distance, `eps_v` a speed and
/// `event_bisect_tol` a time span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub eps_x: f64,
    pub eps_v: f64,
    pub event_bisect_tol: f64,
    /// Upper bound on accepted steps per run.
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self::for_scales(1.0, 1.0, 1.0)
    }
}

impl StepControl {
    /// Defaults for a problem with the given position, velocity and time scales.
    pub fn for_scales(position: f64, velocity: f64, horizon: f64) -> Self {
        let horizon = horizon.max(1e-300);
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            dt_init: (1e-3 * horizon).min(1e-2),
            dt_min: 1e-15 * horizon.max(1.0),
            dt_max: horizon,
            eps_x: 1e-8 * position,
            eps_v: 1e-6 * velocity,
            event_bisect_tol: 1e-12 * horizon.max(1.0),
            max_steps: 2_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("eps_x", self.eps_x),
            ("eps_v", self.eps_v),
            ("event_bisect_tol", self.event_bisect_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(IntegratorError::InvalidControl(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(IntegratorError::InvalidControl(format!(
                "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if self.max_steps == 0 {
            return Err(IntegratorError::InvalidControl("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Tightens every tolerance by `factor` (< 1); step bounds are kept.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            eps_x: self.eps_x * factor,
            eps_v: self.eps_v * factor,
            event_bisect_tol: self.event_bisect_tol * factor,
            dt_init: (self.dt_init * factor).max(self.dt_min),
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        StepControl::default().validate().unwrap();
        StepControl::for_scales(3.0, 0.5, 20.0).validate().unwrap();
    }

    #[test]
    fn rejects_bad_ordering() {
        let c = StepControl {
            dt_init: 10.0,
            dt_max: 1.0,
            ..StepControl::default()
        };
        assert!(c.validate().is_err());
        let c = StepControl {
            eps_x: 0.0,
            ..StepControl::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn tightening_scales_tolerances() {
        let c = StepControl::default().tightened(0.1);
        assert!((c.rel_tol - 1e-10).abs() < 1e-24);
        assert!((c.eps_x - 1e-9).abs() < 1e-23);
        c.validate().unwrap();
    }
}
