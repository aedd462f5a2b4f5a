//! Particle state and the alignment dynamics.

mod partition;
mod system;

pub use partition::{ClusterPartition, MergeRecord, PartitionError};
pub use system::{
    dissipation_r, momentum, rhs, velocity_diameter_r, ClusterFrame, ModelError, Normalization,
    ParticleSystem,
};
