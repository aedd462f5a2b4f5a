use serde::{Deserialize, Serialize};

/// Quantities recorded at every accepted step of a run.
///
/// `dissipated[k]` is `∫₀^{t_k} R dt` accumulated by the stepper under the
/// floored kernel, and `v_increments[k][i]` is `∫ |v̇_i| dt` over
/// `[t_{k−1}, t_k]`. `big_r` uses the raw kernel and is `∞` at a coincidence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub n_particles: usize,
    pub dim: usize,
    /// `c · N`, the factor in `dr/dt = −2 c N R`; one under `1/N` coupling.
    pub coupling_n: f64,
    pub times: Vec<f64>,
    pub r: Vec<f64>,
    pub big_r: Vec<f64>,
    pub momentum: Vec<Vec<f64>>,
    pub max_speed: Vec<f64>,
    pub dissipated: Vec<f64>,
    pub v_increments: Vec<Vec<f64>>,
    /// Sum of the stepper's local error estimates for `∫R`.
    pub quadrature_error: f64,
    pub merges: Vec<MergeMark>,
}

/// A sticking merge applied at sample `index`. The sample holds the state
/// just before the merge; `r_after` is the velocity diameter right after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeMark {
    pub index: usize,
    pub t: f64,
    pub r_after: f64,
}

impl DiagnosticsSeries {
    pub fn new(n_particles: usize, dim: usize, coupling_n: f64) -> Self {
        Self {
            n_particles,
            dim,
            coupling_n,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn push(
        &mut self,
        t: f64,
        r: f64,
        big_r: f64,
        momentum: Vec<f64>,
        max_speed: f64,
        dissipated: f64,
        increments: Vec<f64>,
    ) {
        self.times.push(t);
        self.r.push(r);
        self.big_r.push(big_r);
        self.momentum.push(momentum);
        self.max_speed.push(max_speed);
        self.dissipated.push(dissipated);
        self.v_increments.push(increments);
    }

    /// Intervals between merges as `(start index, r at start, end index,
    /// r at end)`, with `r` taken after the merge at the start and before the
    /// merge at the end.
    pub fn intervals(&self) -> Vec<(usize, f64, usize, f64)> {
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        let (mut start, mut r_start) = (0, self.r[0]);
        for m in &self.merges {
            out.push((start, r_start, m.index, self.r[m.index]));
            start = m.index;
            r_start = m.r_after;
        }
        let last = self.len() - 1;
        if last > start || out.is_empty() {
            out.push((start, r_start, last, self.r[last]));
        }
        out
    }

    /// Velocity diameter just after sample `k`'s merge, if one happened there.
    pub fn r_after(&self, k: usize) -> f64 {
        self.merges
            .iter()
            .rev()
            .find(|m| m.index == k)
            .map(|m| m.r_after)
            .unwrap_or(self.r[k])
    }
}
