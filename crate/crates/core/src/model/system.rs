use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::partition::ClusterPartition;
use crate::weights::{Weight, WeightKernel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("particles {0} and {1} share a cluster but differ in state")]
    InconsistentCluster(usize, usize),
    #[error("clusters of particles {0} and {1} coincide in position with a raw singular kernel")]
    SingularEvaluation(usize, usize),
}

/// Whether the interaction sum carries the `1/N` prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    OverN,
    Unnormalized,
}

impl Normalization {
    pub fn coupling(self, n: usize) -> f64 {
        match self {
            Normalization::OverN => 1.0 / n as f64,
            Normalization::Unnormalized => 1.0,
        }
    }
}

/// Positions, velocities and cluster partition of `N` particles in `d` dimensions.
///
/// Arrays are row-major `N × d`. Members of one cluster always carry
/// bitwise-identical positions and velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    t: f64,
    dim: usize,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    partition: ClusterPartition,
    normalization: Normalization,
}

impl ParticleSystem {
    pub fn new(
        positions: Vec<f64>,
        velocities: Vec<f64>,
        dim: usize,
        normalization: Normalization,
    ) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::Shape("dimension must be at least 1".into()));
        }
        if positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(ModelError::Shape(format!(
                "{} position entries do not form N x {dim} with N >= 1",
                positions.len()
            )));
        }
        if velocities.len() != positions.len() {
            return Err(ModelError::Shape(format!(
                "{} velocity entries for {} position entries",
                velocities.len(),
                positions.len()
            )));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("positions".into()));
        }
        if velocities.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("velocities".into()));
        }
        let n = positions.len() / dim;
        Ok(Self {
            t: 0.0,
            dim,
            positions,
            velocities,
            partition: ClusterPartition::singletons(n),
            normalization,
        })
    }

    /// Builds from per-particle rows.
    pub fn from_rows(
        positions: &[Vec<f64>],
        velocities: &[Vec<f64>],
        normalization: Normalization,
    ) -> Result<Self, ModelError> {
        let dim = positions.first().map_or(0, Vec::len);
        if positions.iter().chain(velocities).any(|r| r.len() != dim) {
            return Err(ModelError::Shape("rows of unequal length".into()));
        }
        Self::new(
            positions.concat(),
            velocities.concat(),
            dim,
            normalization,
        )
    }

    /// Replaces the partition; members of each cluster must already agree.
    pub fn with_partition(mut self, partition: ClusterPartition) -> Result<Self, ModelError> {
        if partition.len() != self.n_particles() {
            return Err(ModelError::Shape(format!(
                "partition over {} indices for {} particles",
                partition.len(),
                self.n_particles()
            )));
        }
        self.partition = partition;
        self.check_clusters()?;
        Ok(self)
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_particles(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn partition(&self) -> &ClusterPartition {
        &self.partition
    }

    pub(crate) fn partition_mut(&mut self) -> &mut ClusterPartition {
        &mut self.partition
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    /// Writes a representative's state into every member of its cluster.
    pub(crate) fn set_cluster_state(&mut self, members: &[usize], x: &[f64], v: &[f64]) {
        let d = self.dim;
        for &i in members {
            self.positions[i * d..(i + 1) * d].copy_from_slice(x);
            self.velocities[i * d..(i + 1) * d].copy_from_slice(v);
        }
    }

    /// Checks that cluster members agree bitwise and that all values are finite.
    pub fn check_clusters(&self) -> Result<(), ModelError> {
        if self.positions.iter().chain(&self.velocities).any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("state".into()));
        }
        for i in 0..self.n_particles() {
            let r = self.partition.find(i);
            if self.position(i) != self.position(r) || self.velocity(i) != self.velocity(r) {
                return Err(ModelError::InconsistentCluster(r, i));
            }
        }
        Ok(())
    }

    pub fn frame(&self) -> ClusterFrame {
        ClusterFrame::new(self)
    }
}

/// Packed view of a system: one state vector per cluster plus its multiplicity.
///
/// Clusters are ordered by representative index. `coupling` is `1/N` or `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFrame {
    pub reps: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    pub mass: Vec<f64>,
    pub dim: usize,
    pub n_particles: usize,
    pub coupling: f64,
}

impl ClusterFrame {
    pub fn new(sys: &ParticleSystem) -> Self {
        let members = sys.partition.clusters();
        let reps: Vec<usize> = members.iter().map(|m| sys.partition.find(m[0])).collect();
        let mass = members.iter().map(|m| m.len() as f64).collect();
        Self {
            reps,
            members,
            mass,
            dim: sys.dim,
            n_particles: sys.n_particles(),
            coupling: sys.normalization.coupling(sys.n_particles()),
        }
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Cluster slot of particle `i`.
    pub fn slot_of(&self, i: usize) -> usize {
        self.members
            .iter()
            .position(|m| m.contains(&i))
            .expect("particle belongs to a cluster")
    }

    /// Smallest member index of a cluster; used when reporting events.
    pub fn label(&self, slot: usize) -> usize {
        self.members[slot][0]
    }

    /// Effective coupling of the relative motion of two clusters:
    /// `(v_J − v_I)' = −κ (v_J − v_I) ψ + …` with `κ = c (m_I + m_J)`.
    pub fn kappa(&self, a: usize, b: usize) -> f64 {
        self.coupling * (self.mass[a] + self.mass[b])
    }

    pub fn pack(&self, sys: &ParticleSystem) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(self.len() * self.dim);
        let mut v = Vec::with_capacity(self.len() * self.dim);
        for &r in &self.reps {
            x.extend_from_slice(sys.position(r));
            v.extend_from_slice(sys.velocity(r));
        }
        (x, v)
    }

    pub fn unpack_into(&self, sys: &mut ParticleSystem, x: &[f64], v: &[f64]) {
        let d = self.dim;
        for (k, m) in self.members.iter().enumerate() {
            sys.set_cluster_state(m, &x[k * d..(k + 1) * d], &v[k * d..(k + 1) * d]);
        }
    }

    /// Cluster accelerations into `out` (`len × d`). Pair contributions are
    /// accumulated in a fixed `(I, J)` order, `I < J`.
    pub fn accelerations(
        &self,
        x: &[f64],
        v: &[f64],
        kernel: &WeightKernel,
        out: &mut [f64],
    ) -> Result<(), ModelError> {
        self.accelerations_with_dissipation(x, v, kernel, out).map(|_| ())
    }

    /// Accelerations plus the dissipation `R` under the same kernel, in one pass.
    pub fn accelerations_with_dissipation(
        &self,
        x: &[f64],
        v: &[f64],
        kernel: &WeightKernel,
        out: &mut [f64],
    ) -> Result<f64, ModelError> {
        let d = self.dim;
        let n = self.len();
        out.iter_mut().for_each(|a| *a = 0.0);
        let mut diff = vec![0.0; d];
        let mut big_r = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let (mut s2, mut u2) = (0.0, 0.0);
                for c in 0..d {
                    let dx = x[j * d + c] - x[i * d + c];
                    let dv = v[j * d + c] - v[i * d + c];
                    s2 += dx * dx;
                    u2 += dv * dv;
                    diff[c] = dv;
                }
                let w = kernel.eval_unchecked(s2.sqrt());
                if w.is_infinite() {
                    return Err(ModelError::SingularEvaluation(
                        self.label(i),
                        self.label(j),
                    ));
                }
                let ci = self.coupling * self.mass[j] * w;
                let cj = self.coupling * self.mass[i] * w;
                for c in 0..d {
                    out[i * d + c] += ci * diff[c];
                    out[j * d + c] -= cj * diff[c];
                }
                big_r += self.mass[i] * self.mass[j] * u2 * w;
            }
        }
        if out.iter().any(|a| !a.is_finite()) || !big_r.is_finite() {
            return Err(ModelError::NonFinite("accelerations".into()));
        }
        Ok(2.0 * big_r)
    }

    /// Acceleration of one cluster only (`O(len)`).
    pub fn acceleration_of(
        &self,
        slot: usize,
        x: &[f64],
        v: &[f64],
        kernel: &WeightKernel,
        out: &mut [f64],
    ) {
        let d = self.dim;
        out.iter_mut().for_each(|a| *a = 0.0);
        for j in 0..self.len() {
            if j == slot {
                continue;
            }
            let mut s2 = 0.0;
            for c in 0..d {
                let dx = x[j * d + c] - x[slot * d + c];
                s2 += dx * dx;
            }
            let w = self.coupling * self.mass[j] * kernel.eval_unchecked(s2.sqrt());
            for c in 0..d {
                out[c] += w * (v[j * d + c] - v[slot * d + c]);
            }
        }
    }

    /// `r = Σ_{i,j} |v_i − v_j|²` over ordered particle pairs.
    pub fn velocity_diameter(&self, v: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let mut s2 = 0.0;
                for c in 0..d {
                    let dv = v[j * d + c] - v[i * d + c];
                    s2 += dv * dv;
                }
                acc += self.mass[i] * self.mass[j] * s2;
            }
        }
        2.0 * acc
    }

    /// `R = Σ_{i,j} |v_i − v_j|² ψ(|x_i − x_j|)` over ordered pairs of particles
    /// in distinct clusters. `f64::INFINITY` marks a coincidence with nonzero
    /// relative velocity under a raw singular kernel.
    pub fn dissipation(&self, x: &[f64], v: &[f64], kernel: &WeightKernel) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let (mut s2, mut u2) = (0.0, 0.0);
                for c in 0..d {
                    let dx = x[j * d + c] - x[i * d + c];
                    let dv = v[j * d + c] - v[i * d + c];
                    s2 += dx * dx;
                    u2 += dv * dv;
                }
                if u2 == 0.0 {
                    continue;
                }
                let w = kernel.eval_unchecked(s2.sqrt());
                acc += self.mass[i] * self.mass[j] * u2 * w;
            }
        }
        2.0 * acc
    }
}

/// Per-particle accelerations of the alignment dynamics.
///
/// Cluster `I` receives `c Σ_{J≠I} m_J (v_J − v_I) ψ(|x_J − x_I|)` and every
/// member copies its representative's value; pairs inside one cluster do not
/// interact.
pub fn rhs(state: &ParticleSystem, kernel: &WeightKernel) -> Result<Vec<f64>, ModelError> {
    let frame = state.frame();
    let (x, v) = frame.pack(state);
    let mut acc = vec![0.0; x.len()];
    frame.accelerations(&x, &v, kernel, &mut acc)?;
    let d = state.dim;
    let mut out = vec![0.0; state.positions.len()];
    for (k, m) in frame.members.iter().enumerate() {
        for &i in m {
            out[i * d..(i + 1) * d].copy_from_slice(&acc[k * d..(k + 1) * d]);
        }
    }
    Ok(out)
}

/// Total momentum `Σ_i v_i`, counting every particle.
pub fn momentum(state: &ParticleSystem) -> Vec<f64> {
    let d = state.dim;
    let mut p = vec![0.0; d];
    for i in 0..state.n_particles() {
        for (c, pc) in p.iter_mut().enumerate() {
            *pc += state.velocities[i * d + c];
        }
    }
    p
}

/// `r(t) = Σ_{i,j} |v_i − v_j|²` over ordered pairs.
pub fn velocity_diameter_r(state: &ParticleSystem) -> f64 {
    let frame = state.frame();
    let (_, v) = frame.pack(state);
    frame.velocity_diameter(&v)
}

/// `R(t)` evaluated with the raw kernel. Same-cluster pairs contribute zero.
pub fn dissipation_r(state: &ParticleSystem, kernel: &WeightKernel) -> Weight {
    let frame = state.frame();
    let (x, v) = frame.pack(state);
    let r = frame.dissipation(&x, &v, &kernel.raw());
    if r.is_infinite() {
        Weight::Infinite
    } else {
        Weight::Finite(r)
    }
}
