//! Run configuration: parsing, validation and default resolution.
//!
//! A configuration is a JSON document. Unknown keys are rejected, and every
//! validation failure names the offending key:
//!
//! ```
//! use csflock::config::{ConfigError, SimConfig};
//!
//! let err = SimConfig::from_json_str(r#"{
//!     "kernel": {"kind": "singular", "alpha": -1},
//!     "n": 2, "dim": 1, "t_final": 1,
//!     "initial": {"scenario": "critical-pair"}
//! }"#).unwrap_err();
//! assert!(matches!(err, ConfigError::Schema { ref path, .. } if path == "kernel.alpha"));
//! ```
//!
//! Defaults that depend on the problem scale (event tolerances, the kernel
//! floor) are resolved during parsing from the materialized initial state, so
//! a parsed configuration serializes with every value explicit.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::integrator::{RunOptions, StepControl};
use crate::model::{ClusterPartition, Normalization, ParticleSystem};
use crate::scenarios;
use crate::weights::{KernelKind, WeightKernel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Communication weight as written in a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Singular {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
    CuckerSmale {
        #[serde(rename = "K")]
        k: f64,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
}

impl KernelSpec {
    pub fn kind(&self) -> KernelKind {
        match *self {
            KernelSpec::Singular { alpha, .. } => KernelKind::Singular { alpha },
            KernelSpec::CuckerSmale { k, beta, .. } => KernelKind::CuckerSmale { k, beta },
        }
    }

    pub fn floor(&self) -> Option<f64> {
        match *self {
            KernelSpec::Singular { floor, .. } | KernelSpec::CuckerSmale { floor, .. } => floor,
        }
    }

    fn with_floor(self, f: f64) -> Self {
        match self {
            KernelSpec::Singular { alpha, .. } => KernelSpec::Singular {
                alpha,
                floor: Some(f),
            },
            KernelSpec::CuckerSmale { k, beta, .. } => KernelSpec::CuckerSmale {
                k,
                beta,
                floor: Some(f),
            },
        }
    }

    /// The kernel with its floor (zero when unset).
    pub fn kernel(&self) -> WeightKernel {
        WeightKernel::new(self.kind(), self.floor().unwrap_or(0.0))
            .expect("kernel parameters are validated at parse time")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: String| Err(ConfigError::schema(format!("kernel.{key}"), msg));
        match *self {
            KernelSpec::Singular { alpha, .. } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return bad("alpha", format!("alpha must be positive, got {alpha}"));
                }
            }
            KernelSpec::CuckerSmale { k, beta, .. } => {
                if !(k.is_finite() && k > 0.0) {
                    return bad("K", format!("K must be positive, got {k}"));
                }
                if !(beta.is_finite() && beta >= 0.0) {
                    return bad("beta", format!("beta must be nonnegative, got {beta}"));
                }
            }
        }
        if let Some(f) = self.floor() {
            if !(f.is_finite() && f >= 0.0) {
                return bad("floor", format!("floor must be nonnegative, got {f}"));
            }
        }
        Ok(())
    }
}

/// Initial condition: a named scenario, explicit arrays, or a seeded cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCondition {
    Scenario(ScenarioInit),
    Explicit(ExplicitInit),
    Random(RandomInit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioInit {
    pub scenario: String,
    /// Initial separation of a two-body scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<f64>,
    /// Initial relative velocity `v₂ − v₁` of a two-body scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
}

/// Rows of `d` coordinates per particle. `clusters` lists groups of particles
/// that start stuck together; their rows must be identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInit {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clusters: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInit {
    pub random: RandomCloud,
}

/// Positions uniform in `[−half_width, half_width]^d`, velocities uniform in
/// the ball of radius `speed`, pairwise distances at least `min_separation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomCloud {
    pub half_width: f64,
    pub speed: f64,
    pub min_separation: f64,
}

impl Default for RandomCloud {
    fn default() -> Self {
        Self {
            half_width: 1.0,
            speed: 1.0,
            min_separation: 1e-3,
        }
    }
}

impl RandomCloud {
    /// Draws `n` particles in `dim` dimensions from a ChaCha8 stream.
    pub fn sample(
        &self,
        n: usize,
        dim: usize,
        seed: u64,
        normalization: Normalization,
    ) -> Result<ParticleSystem, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<f64> = Vec::with_capacity(n * dim);
        for i in 0..n {
            let mut tries = 0;
            loop {
                let p: Vec<f64> = (0..dim)
                    .map(|_| rng.gen_range(-self.half_width..=self.half_width))
                    .collect();
                let ok = (0..i).all(|j| {
                    let d2: f64 = (0..dim).map(|c| (p[c] - x[j * dim + c]).powi(2)).sum();
                    d2.sqrt() >= self.min_separation
                });
                if ok {
                    x.extend(p);
                    break;
                }
                tries += 1;
                if tries > 10_000 {
                    return Err(format!(
                        "cannot place {n} particles at separation {}",
                        self.min_separation
                    ));
                }
            }
        }
        let mut v = Vec::with_capacity(n * dim);
        for _ in 0..n {
            loop {
                let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                if p.iter().map(|a| a * a).sum::<f64>() <= 1.0 {
                    v.extend(p.into_iter().map(|a| a * self.speed));
                    break;
                }
            }
        }
        ParticleSystem::new(x, v, dim, normalization).map_err(|e| e.to_string())
    }
}

/// Sampling, output location and run recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Trajectory sample spacing; the grid is adjusted to end on `t_final`.
    pub sample_dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Runs are sequential with a fixed summation order, so this only
    /// documents the requirement; it is echoed in summaries.
    pub reproducible: bool,
    /// Keep the dense output for post-processing diagnostics.
    pub dense: bool,
}

/// A validated configuration with every default resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub kernel: KernelSpec,
    pub n: usize,
    pub dim: usize,
    pub normalization: Normalization,
    pub t_final: f64,
    pub initial: InitialCondition,
    pub step_control: StepControl,
    pub output: OutputConfig,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kernel: KernelSpec,
    n: usize,
    dim: usize,
    #[serde(default)]
    normalization: Normalization,
    t_final: f64,
    initial: InitialCondition,
    #[serde(default)]
    step_control: PartialControl,
    #[serde(default)]
    output: PartialOutput,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialControl {
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    dt_init: Option<f64>,
    dt_min: Option<f64>,
    dt_max: Option<f64>,
    eps_x: Option<f64>,
    eps_v: Option<f64>,
    event_bisect_tol: Option<f64>,
    max_steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialOutput {
    sample_dt: Option<f64>,
    dir: Option<String>,
    reproducible: Option<bool>,
    dense: Option<bool>,
}

/// Particle counts up to this size keep dense output by default.
pub const DENSE_DEFAULT_MAX_N: usize = 20;

/// Default number of sample intervals on `[0, t_final]`.
pub const DEFAULT_SAMPLES: usize = 200;

/// Command-line style overrides applied to the document before parsing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub n: Option<usize>,
    pub dim: Option<usize>,
    pub t_final: Option<f64>,
    pub seed: Option<u64>,
    pub normalization: Option<Normalization>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        *self == Overrides::default()
    }

    /// Writes the overrides into a configuration document.
    pub fn apply(&self, doc: &mut Value) -> Result<(), ConfigError> {
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| ConfigError::schema("", "configuration must be an object"))?;
        if let Some(a) = self.alpha {
            let kernel = obj
                .get_mut("kernel")
                .and_then(Value::as_object_mut)
                .ok_or_else(|| ConfigError::schema("kernel", "missing kernel object"))?;
            if kernel.get("kind").and_then(Value::as_str) != Some("singular") {
                return Err(ConfigError::schema(
                    "kernel.alpha",
                    "alpha applies to the singular kernel only",
                ));
            }
            kernel.insert("alpha".into(), a.into());
        }
        if let Some(n) = self.n {
            obj.insert("n".into(), n.into());
        }
        if let Some(d) = self.dim {
            obj.insert("dim".into(), d.into());
        }
        if let Some(t) = self.t_final {
            obj.insert("t_final".into(), t.into());
        }
        if let Some(s) = self.seed {
            obj.insert("seed".into(), s.into());
        }
        if let Some(nm) = self.normalization {
            obj.insert(
                "normalization".into(),
                serde_json::to_value(nm).expect("normalization serializes"),
            );
        }
        Ok(())
    }
}

impl SimConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| ConfigError::schema("", format!("malformed JSON: {e}")))?;
        Self::from_value(doc)
    }

    pub fn from_json_str_with(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut doc: Value = serde_json::from_str(text)
            .map_err(|e| ConfigError::schema("", format!("malformed JSON: {e}")))?;
        overrides.apply(&mut doc)?;
        Self::from_value(doc)
    }

    pub fn from_path(path: &std::path::Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json_str_with(&text, overrides)
    }

    /// Parses and validates a document, resolving every default.
    pub fn from_value(doc: Value) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::schema(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        raw.kernel.validate()?;
        if raw.n == 0 {
            return Err(ConfigError::schema("n", "need at least one particle"));
        }
        if raw.dim == 0 {
            return Err(ConfigError::schema("dim", "dimension must be positive"));
        }
        if !(raw.t_final.is_finite() && raw.t_final > 0.0) {
            return Err(ConfigError::schema(
                "t_final",
                format!("t_final must be positive, got {}", raw.t_final),
            ));
        }
        let state = materialize(
            &raw.initial,
            raw.n,
            raw.dim,
            raw.kernel.kernel(),
            raw.normalization,
            raw.seed,
        )?;
        let (pos_scale, vel_scale) = scales(&state);
        let kernel = match raw.kernel.floor() {
            Some(_) => raw.kernel,
            None => raw.kernel.with_floor(match raw.kernel {
                KernelSpec::Singular { .. } => DEFAULT_FLOOR * pos_scale,
                KernelSpec::CuckerSmale { .. } => 0.0,
            }),
        };
        let d = StepControl::for_scales(pos_scale, vel_scale, raw.t_final);
        let p = raw.step_control;
        let step_control = StepControl {
            rel_tol: p.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: p.abs_tol.unwrap_or(d.abs_tol),
            dt_init: p.dt_init.unwrap_or(d.dt_init),
            dt_min: p.dt_min.unwrap_or(d.dt_min),
            dt_max: p.dt_max.unwrap_or(d.dt_max),
            eps_x: p.eps_x.unwrap_or(d.eps_x),
            eps_v: p.eps_v.unwrap_or(d.eps_v),
            event_bisect_tol: p.event_bisect_tol.unwrap_or(d.event_bisect_tol),
            max_steps: p.max_steps.unwrap_or(d.max_steps),
        };
        step_control
            .validate()
            .map_err(|e| ConfigError::schema("step_control", e.to_string()))?;
        let o = raw.output;
        let sample_dt = o.sample_dt.unwrap_or(raw.t_final / DEFAULT_SAMPLES as f64);
        if !(sample_dt.is_finite() && sample_dt > 0.0) {
            return Err(ConfigError::schema(
                "output.sample_dt",
                format!("sample_dt must be positive, got {sample_dt}"),
            ));
        }
        Ok(SimConfig {
            kernel,
            n: raw.n,
            dim: raw.dim,
            normalization: raw.normalization,
            t_final: raw.t_final,
            initial: raw.initial,
            step_control,
            output: OutputConfig {
                sample_dt,
                dir: o.dir,
                reproducible: o.reproducible.unwrap_or(true),
                dense: o.dense.unwrap_or(raw.n <= DENSE_DEFAULT_MAX_N),
            },
            seed: raw.seed,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("configuration serializes")
    }

    pub fn weight_kernel(&self) -> WeightKernel {
        self.kernel.kernel()
    }

    /// The initial state described by the configuration.
    pub fn initial_state(&self) -> Result<ParticleSystem, ConfigError> {
        materialize(
            &self.initial,
            self.n,
            self.dim,
            self.weight_kernel(),
            self.normalization,
            self.seed,
        )
    }

    /// Sample grid: `m + 1` equally spaced times on `[0, t_final]` with
    /// spacing at most `sample_dt`.
    pub fn sample_times(&self) -> Vec<f64> {
        let m = (self.t_final / self.output.sample_dt - 1e-9).ceil().max(1.0) as usize;
        (0..=m)
            .map(|k| self.t_final * k as f64 / m as f64)
            .collect()
    }

    /// Everything `simulate_system` needs.
    pub fn build(
        &self,
    ) -> Result<(ParticleSystem, WeightKernel, StepControl, RunOptions), ConfigError> {
        let state = self.initial_state()?;
        let opts = RunOptions {
            t_final: self.t_final,
            sample_times: self.sample_times(),
            record_dense: self.output.dense,
        };
        Ok((state, self.weight_kernel(), self.step_control, opts))
    }
}

impl<'de> Deserialize<'de> for SimConfig {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(de)?;
        SimConfig::from_value(v).map_err(serde::de::Error::custom)
    }
}

/// Kernel floor relative to the position scale when none is given.
pub const DEFAULT_FLOOR: f64 = 1e-10;

/// Position and velocity scales: the diameters of the initial cloud, or one
/// when the cloud is degenerate.
pub fn scales(state: &ParticleSystem) -> (f64, f64) {
    let d = state.dim();
    (diameter(state.positions(), d), diameter(state.velocities(), d))
}

fn diameter(flat: &[f64], d: usize) -> f64 {
    let rows: Vec<&[f64]> = flat.chunks(d.max(1)).collect();
    let mut m: f64 = 0.0;
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            let d2: f64 = a.iter().zip(*b).map(|(p, q)| (p - q).powi(2)).sum();
            m = m.max(d2.sqrt());
        }
    }
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

fn materialize(
    init: &InitialCondition,
    n: usize,
    dim: usize,
    kernel: WeightKernel,
    normalization: Normalization,
    seed: u64,
) -> Result<ParticleSystem, ConfigError> {
    match init {
        InitialCondition::Scenario(s) => {
            scenarios::initial_state(&s.scenario, s.w0, s.u0, n, dim, kernel, normalization, seed)
        }
        InitialCondition::Random(r) => {
            let c = r.random;
            if !(c.half_width > 0.0 && c.speed >= 0.0 && c.min_separation >= 0.0) {
                return Err(ConfigError::schema(
                    "initial.random",
                    "need half_width > 0, speed >= 0, min_separation >= 0",
                ));
            }
            c.sample(n, dim, seed, normalization)
                .map_err(|m| ConfigError::schema("initial.random", m))
        }
        InitialCondition::Explicit(e) => {
            for (key, rows) in [("positions", &e.positions), ("velocities", &e.velocities)] {
                if rows.len() != n {
                    return Err(ConfigError::schema(
                        format!("initial.{key}"),
                        format!("expected {n} rows, got {}", rows.len()),
                    ));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != dim {
                        return Err(ConfigError::schema(
                            format!("initial.{key}[{i}]"),
                            format!("expected {dim} coordinates, got {}", row.len()),
                        ));
                    }
                }
            }
            let sys = ParticleSystem::from_rows(&e.positions, &e.velocities, normalization)
                .map_err(|m| ConfigError::schema("initial", m.to_string()))?;
            if e.clusters.is_empty() {
                return Ok(sys);
            }
            let mut p = ClusterPartition::singletons(n);
            for (k, group) in e.clusters.iter().enumerate() {
                for &i in group {
                    if i >= n {
                        return Err(ConfigError::schema(
                            format!("initial.clusters[{k}]"),
                            format!("particle {i} out of range"),
                        ));
                    }
                }
                for w in group.windows(2) {
                    if !p.same(w[0], w[1]) {
                        p.union(w[0], w[1], 0.0).map_err(|m| {
                            ConfigError::schema(format!("initial.clusters[{k}]"), m.to_string())
                        })?;
                    }
                }
            }
            sys.with_partition(p)
                .map_err(|m| ConfigError::schema("initial.clusters", m.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "kernel": {"kind": "singular", "alpha": 0.3},
        "n": 2, "dim": 1, "t_final": 1,
        "initial": {"scenario": "critical-pair"}
    }"#;

    fn schema_path(r: Result<SimConfig, ConfigError>) -> String {
        match r {
            Err(ConfigError::Schema { path, .. }) => path,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document_parses() {
        let c = SimConfig::from_json_str(MINIMAL).unwrap();
        assert_eq!(c.n, 2);
        assert_eq!(c.normalization, Normalization::OverN);
        assert_eq!(c.kernel.floor(), Some(1e-10));
        assert_eq!(c.step_control.eps_x, 1e-8);
        assert!(c.output.dense);
        assert_eq!(c.sample_times().len(), DEFAULT_SAMPLES + 1);
    }

    #[test]
    fn round_trip() {
        let c = SimConfig::from_json_str(MINIMAL).unwrap();
        let again = SimConfig::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(c, again);
        let r = SimConfig::from_json_str(
            r#"{"kernel": {"kind": "cucker-smale", "K": 1, "beta": 0.5}, "n": 5, "dim": 2,
                "t_final": 3, "seed": 7, "initial": {"random": {}}}"#,
        )
        .unwrap();
        assert_eq!(r, SimConfig::from_json_str(&r.to_json_string()).unwrap());
    }

    #[test]
    fn rejects_negative_alpha() {
        let doc = MINIMAL.replace("0.3", "-1");
        assert_eq!(schema_path(SimConfig::from_json_str(&doc)), "kernel.alpha");
    }

    #[test]
    fn rejects_unknown_keys() {
        let doc = MINIMAL.replace("\"n\": 2", "\"n\": 2, \"colour\": 3");
        assert!(SimConfig::from_json_str(&doc).is_err());
        let doc = MINIMAL.replace("\"alpha\": 0.3", "\"alpha\": 0.3, \"gamma\": 1");
        assert!(SimConfig::from_json_str(&doc).is_err());
    }

    #[test]
    fn rejects_wrong_shapes() {
        let doc = r#"{"kernel": {"kind": "singular", "alpha": 0.3}, "n": 2, "dim": 1, "t_final": 1,
            "initial": {"positions": [[0.0], [1.0, 2.0]], "velocities": [[0.0], [1.0]]}}"#;
        assert_eq!(schema_path(SimConfig::from_json_str(doc)), "initial.positions[1]");
        let doc = doc.replace("[[0.0], [1.0, 2.0]]", "[[0.0]]");
        assert_eq!(schema_path(SimConfig::from_json_str(&doc)), "initial.positions");
    }

    #[test]
    fn type_errors_carry_a_path() {
        let doc = MINIMAL.replace("\"t_final\": 1", "\"t_final\": \"soon\"");
        assert_eq!(schema_path(SimConfig::from_json_str(&doc)), "t_final");
    }

    #[test]
    fn overrides_apply_before_validation() {
        let o = Overrides {
            alpha: Some(0.45),
            t_final: Some(4.0),
            ..Overrides::default()
        };
        let c = SimConfig::from_json_str_with(MINIMAL, &o).unwrap();
        assert_eq!(c.kernel.kind(), KernelKind::Singular { alpha: 0.45 });
        assert_eq!(c.t_final, 4.0);
        let bad = Overrides {
            n: Some(3),
            ..Overrides::default()
        };
        assert!(SimConfig::from_json_str_with(MINIMAL, &bad).is_err());
    }

    #[test]
    fn explicit_clusters_must_agree() {
        let doc = r#"{"kernel": {"kind": "singular", "alpha": 0.3}, "n": 3, "dim": 1, "t_final": 1,
            "initial": {"positions": [[0.0], [0.0], [1.0]], "velocities": [[0.0], [0.0], [1.0]],
                        "clusters": [[0, 1]]}}"#;
        let c = SimConfig::from_json_str(doc).unwrap();
        assert_eq!(c.initial_state().unwrap().partition().cluster_count(), 2);
        let bad = doc.replace("[[0.0], [0.0], [1.0]], \"velocities\"", "[[0.0], [0.5], [1.0]], \"velocities\"");
        assert!(SimConfig::from_json_str(&bad).is_err());
    }

    #[test]
    fn random_cloud_respects_bounds() {
        let s = RandomCloud::default()
            .sample(50, 2, 3, Normalization::OverN)
            .unwrap();
        for i in 0..50 {
            assert!(s.position(i).iter().all(|x| x.abs() <= 1.0));
            assert!(s.velocity(i).iter().map(|v| v * v).sum::<f64>() <= 1.0);
            for j in 0..i {
                let d2: f64 = (0..2).map(|c| (s.position(i)[c] - s.position(j)[c]).powi(2)).sum();
                assert!(d2.sqrt() >= 1e-3);
            }
        }
        let again = RandomCloud::default()
            .sample(50, 2, 3, Normalization::OverN)
            .unwrap();
        assert_eq!(s, again);
    }
}
