//! Cucker-Smale flocking with a singular communication weight.
//!
//! The crate integrates the discrete alignment model
//!
//! ```text
//! x_i' = v_i,
//! v_i' = c Σ_{k ∈ B_i} (v_k − v_i) ψ(|x_k − x_i|),    ψ(s) = s^(−α),
//! ```
//!
//! in the sense of piecewise weak solutions: trajectories may cross through
//! each other (collisions) or stick together in finite time, after which they
//! move as one cluster forever. On top of the simulator sit a closed-form
//! two-body oracle and a set of diagnostics that check dissipation identities,
//! uniform bounds, total variation and an interpolation inequality on computed
//! trajectories.
//!
//! ```
//! use csflock::config::SimConfig;
//! use csflock::integrator::simulate;
//!
//! let cfg = SimConfig::from_json_str(r#"{
//!     "kernel": {"kind": "singular", "alpha": 0.5},
//!     "n": 2, "dim": 1, "t_final": 2.0,
//!     "initial": {"scenario": "critical-pair"}
//! }"#).unwrap();
//! let run = simulate(&cfg).unwrap();
//! let sticking: Vec<_> = run.events.iter().filter(|e| e.is_sticking()).collect();
//! assert_eq!(sticking.len(), 1);
//! assert!((sticking[0].t - 1.0).abs() < 1e-3);
//! ```

pub mod config;
pub mod diagnostics;
pub mod export;
pub mod integrator;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod scenarios;
pub mod verify;
pub mod weights;

pub use model::{ClusterPartition, Normalization, ParticleSystem};
pub use weights::{Weight, WeightKernel};
