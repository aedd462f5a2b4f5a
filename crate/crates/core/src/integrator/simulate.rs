//! The piecewise restart loop.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::control::StepControl;
use super::events::{detect_in_step, merge, EventRecord};
use super::stepper::{advance, halving_error, DenseStep, Segment};
use super::IntegratorError;
use crate::config::SimConfig;
use crate::diagnostics::{DiagnosticsSeries, MergeMark};
use crate::model::{ClusterFrame, ParticleSystem};
use crate::weights::WeightKernel;

/// Sampled positions and velocities, one row per sample time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub n_particles: usize,
    pub dim: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(n_particles: usize, dim: usize) -> Self {
        Self {
            n_particles,
            dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, x: Vec<f64>, v: Vec<f64>) {
        self.times.push(t);
        self.positions.push(x);
        self.velocities.push(v);
    }

    /// Index of the sample taken exactly at `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }

    /// Position of particle `i` at sample `k`.
    pub fn x(&self, k: usize, i: usize) -> &[f64] {
        &self.positions[k][i * self.dim..(i + 1) * self.dim]
    }

    pub fn v(&self, k: usize, i: usize) -> &[f64] {
        &self.velocities[k][i * self.dim..(i + 1) * self.dim]
    }

    /// Sup-norm distance between the two trajectories over the sample times
    /// they share, positions and velocities alike. `None` without overlap.
    pub fn sup_distance(&self, other: &Trajectory) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut j = 0;
        for (k, &t) in self.times.iter().enumerate() {
            while j < other.len() && other.times[j] < t {
                j += 1;
            }
            if j < other.len() && other.times[j] == t {
                let dx = sup_diff(&self.positions[k], &other.positions[j]);
                let dv = sup_diff(&self.velocities[k], &other.velocities[j]);
                best = Some(best.unwrap_or(0.0).max(dx).max(dv));
            }
        }
        best
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Dense output of one inter-merge interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSegment {
    pub t_start: f64,
    pub t_end: f64,
    /// Cluster members in slot order.
    pub members: Vec<Vec<usize>>,
    pub mass: Vec<f64>,
    pub coupling: f64,
    pub dim: usize,
    pub steps: Vec<DenseStep>,
    /// State at `t_start` for a segment with one cluster (no steps).
    pub start: Option<(Vec<f64>, Vec<f64>)>,
}

impl DenseSegment {
    pub fn slot_of(&self, i: usize) -> usize {
        self.members
            .iter()
            .position(|m| m.contains(&i))
            .expect("particle belongs to a cluster")
    }

    fn nd(&self) -> usize {
        self.members.len() * self.dim
    }

    fn step_at(&self, t: f64) -> Option<&DenseStep> {
        if self.steps.is_empty() {
            return None;
        }
        let k = self.steps.partition_point(|s| s.t_end < t);
        Some(&self.steps[k.min(self.steps.len() - 1)])
    }

    /// Position and velocity of cluster `slot` at time `t` inside the segment.
    pub fn cluster_state(&self, slot: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        match self.step_at(t) {
            Some(step) => {
                let th = step.theta(t);
                let nd = self.nd();
                let x = (0..d).map(|c| step.component(slot * d + c, th)).collect();
                let v = (0..d).map(|c| step.component(nd + slot * d + c, th)).collect();
                (x, v)
            }
            None => {
                let (x0, v0) = self.start.as_ref().expect("single-cluster segment state");
                let dt = t - self.t_start;
                let x = (0..d).map(|c| x0[c] + v0[c] * dt).collect();
                (x, v0.clone())
            }
        }
    }

    /// Packed cluster positions and velocities at `t`.
    pub fn packed_state(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(self.nd());
        let mut v = Vec::with_capacity(self.nd());
        for slot in 0..self.members.len() {
            let (xs, vs) = self.cluster_state(slot, t);
            x.extend(xs);
            v.extend(vs);
        }
        (x, v)
    }

    pub(crate) fn frame(&self, n_particles: usize) -> ClusterFrame {
        ClusterFrame {
            reps: self.members.iter().map(|m| m[0]).collect(),
            members: self.members.clone(),
            mass: self.mass.clone(),
            dim: self.dim,
            n_particles,
            coupling: self.coupling,
        }
    }
}

/// Continuous record of a run: one [`DenseSegment`] per inter-merge interval.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DenseTrajectory {
    pub n_particles: usize,
    pub segments: Vec<DenseSegment>,
    /// Kernel the steps were taken with.
    #[serde(skip)]
    pub kernel: Option<WeightKernel>,
}

impl DenseTrajectory {
    /// The segment covering `t`; at a merge time the later one.
    pub fn segment_at(&self, t: f64) -> Option<&DenseSegment> {
        let k = self.segments.partition_point(|s| s.t_end <= t);
        self.segments
            .get(k)
            .or_else(|| self.segments.last().filter(|s| t <= s.t_end))
    }

    /// Merge times separating the segments.
    pub fn breaks(&self) -> Vec<f64> {
        self.segments
            .iter()
            .skip(1)
            .map(|s| s.t_start)
            .collect()
    }

    pub fn t_start(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.t_start)
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }

    /// Position and velocity of particle `i` at `t`.
    pub fn particle_state(&self, i: usize, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let seg = self.segment_at(t)?;
        Some(seg.cluster_state(seg.slot_of(i), t))
    }
}

/// Options of [`simulate_system`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub t_final: f64,
    /// Requested sample times, ascending, inside `[t0, t_final]`.
    pub sample_times: Vec<f64>,
    pub record_dense: bool,
}

impl RunOptions {
    /// `samples + 1` equally spaced sample times on `[0, t_final]`.
    pub fn uniform(t_final: f64, samples: usize, record_dense: bool) -> Self {
        let m = samples.max(1);
        Self {
            t_final,
            sample_times: (0..=m).map(|k| t_final * k as f64 / m as f64).collect(),
            record_dense,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected: usize,
    pub segments: usize,
    /// Mean accepted step size.
    pub mean_dt: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub trajectory: Trajectory,
    /// Events sorted by time.
    pub events: Vec<EventRecord>,
    pub diagnostics: DiagnosticsSeries,
    pub dense: Option<DenseTrajectory>,
    pub initial_state: ParticleSystem,
    pub final_state: ParticleSystem,
    pub kernel: WeightKernel,
    pub control: StepControl,
    pub stats: RunStats,
}

impl RunArtifacts {
    pub fn sticking_events(&self) -> impl Iterator<Item = &EventRecord> {
        self.events.iter().filter(|e| e.is_sticking())
    }

    pub fn collision_events(&self) -> impl Iterator<Item = &EventRecord> {
        self.events.iter().filter(|e| e.is_collision())
    }
}

/// A failed run with the prefix computed before the failure.
#[derive(Debug, Clone)]
pub struct SimulateError {
    pub error: IntegratorError,
    pub partial: Option<Box<RunArtifacts>>,
}

impl fmt::Display for SimulateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.partial {
            Some(p) => write!(
                f,
                "{} (completed up to t = {})",
                self.error,
                p.final_state.t()
            ),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for SimulateError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<IntegratorError> for SimulateError {
    fn from(error: IntegratorError) -> Self {
        Self {
            error,
            partial: None,
        }
    }
}

/// Runs a configuration from its initial condition to `t_final`.
pub fn simulate(config: &SimConfig) -> Result<RunArtifacts, SimulateError> {
    let (state, kernel, ctrl, opts) = config
        .build()
        .map_err(|e| IntegratorError::Config(e.to_string()))?;
    simulate_system(state, kernel, ctrl, &opts)
}

struct Run {
    traj: Trajectory,
    events: Vec<EventRecord>,
    diag: DiagnosticsSeries,
    dense: Option<DenseTrajectory>,
    samples: Vec<f64>,
    next_sample: usize,
    raw: WeightKernel,
    dissipated: f64,
    stats: RunStats,
    dt_sum: f64,
}

impl Run {
    fn sample_particles(frame: &ClusterFrame, x: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = frame.dim;
        let mut px = vec![0.0; frame.n_particles * d];
        let mut pv = vec![0.0; frame.n_particles * d];
        for (k, m) in frame.members.iter().enumerate() {
            for &i in m {
                px[i * d..(i + 1) * d].copy_from_slice(&x[k * d..(k + 1) * d]);
                pv[i * d..(i + 1) * d].copy_from_slice(&v[k * d..(k + 1) * d]);
            }
        }
        (px, pv)
    }

    /// Requests an extra trajectory sample at `t`.
    fn request(&mut self, t: f64, now: f64, t_final: f64) {
        if !(t > now && t <= t_final) {
            return;
        }
        let pos = self.next_sample + self.samples[self.next_sample..].partition_point(|&s| s < t);
        if self.samples.get(pos) != Some(&t) {
            self.samples.insert(pos, t);
        }
    }

    /// Emits every pending sample up to `t_hi` from the dense step, using
    /// `y_end` verbatim for a sample falling exactly on `t_hi`.
    fn emit_samples(&mut self, seg: &Segment, step: &DenseStep, t_hi: f64, y_end: &[f64]) {
        let nd = seg.nd();
        while self.next_sample < self.samples.len() && self.samples[self.next_sample] <= t_hi {
            let t = self.samples[self.next_sample];
            let y = if t == t_hi {
                y_end.to_vec()
            } else {
                step.eval_vec(step.theta(t))
            };
            let (px, pv) = Self::sample_particles(&seg.frame, &y[..nd], &y[nd..2 * nd]);
            self.traj.push(t, px, pv);
            self.next_sample += 1;
        }
    }

    fn record(&mut self, seg: &Segment, t: f64, y: &[f64], y_prev: Option<&[f64]>) {
        let frame = &seg.frame;
        let nd = seg.nd();
        let d = frame.dim;
        let (x, v) = (&y[..nd], &y[nd..2 * nd]);
        let r = frame.velocity_diameter(v);
        let big_r = frame.dissipation(x, v, &self.raw);
        let mut p = vec![0.0; d];
        let mut vmax: f64 = 0.0;
        for k in 0..frame.len() {
            let vk = &v[k * d..(k + 1) * d];
            for c in 0..d {
                p[c] += frame.mass[k] * vk[c];
            }
            vmax = vmax.max(vk.iter().map(|a| a * a).sum::<f64>().sqrt());
        }
        let mut inc = vec![0.0; frame.n_particles];
        let q = y[seg.q_index()];
        let q_prev = y_prev.map_or(0.0, |yp| yp[seg.q_index()]);
        if let Some(yp) = y_prev {
            for (k, m) in frame.members.iter().enumerate() {
                let dtv = y[seg.tv_index(k)] - yp[seg.tv_index(k)];
                for &i in m {
                    inc[i] = dtv;
                }
            }
        }
        self.dissipated += q - q_prev;
        self.diag
            .push(t, r, big_r, p, vmax, self.dissipated, inc);
    }

    fn finish(
        self,
        initial: ParticleSystem,
        final_state: ParticleSystem,
        kernel: WeightKernel,
        ctrl: StepControl,
    ) -> RunArtifacts {
        let mut events = self.events;
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut stats = self.stats;
        stats.mean_dt = if stats.accepted > 0 {
            self.dt_sum / stats.accepted as f64
        } else {
            0.0
        };
        RunArtifacts {
            trajectory: self.traj,
            events,
            diagnostics: self.diag,
            dense: self.dense,
            initial_state: initial,
            final_state,
            kernel,
            control: ctrl,
            stats,
        }
    }
}

/// Integrates `state` to `opts.t_final` under `kernel` (normally floored).
///
/// Sticking events merge clusters at their detection time and restart the
/// stepper on the coarser partition. Collisions are recorded and integrated
/// through. The trajectory is sampled at `opts.sample_times` and at every
/// event time; diagnostics are recorded at every accepted step.
pub fn simulate_system(
    state: ParticleSystem,
    kernel: WeightKernel,
    ctrl: StepControl,
    opts: &RunOptions,
) -> Result<RunArtifacts, SimulateError> {
    ctrl.validate()?;
    state.check_clusters().map_err(IntegratorError::Model)?;
    let t0 = state.t();
    let t_final = opts.t_final;
    if !(t_final.is_finite() && t_final > t0) {
        return Err(IntegratorError::Config(format!(
            "t_final must exceed the initial time {t0}, got {t_final}"
        ))
        .into());
    }
    let n = state.n_particles();
    let d = state.dim();
    let coupling_n = state.normalization().coupling(n) * n as f64;
    let mut samples: Vec<f64> = opts
        .sample_times
        .iter()
        .copied()
        .filter(|&t| t >= t0 && t <= t_final)
        .collect();
    samples.sort_by(f64::total_cmp);
    samples.dedup();
    let mut run = Run {
        traj: Trajectory::new(n, d),
        events: Vec::new(),
        diag: DiagnosticsSeries::new(n, d, coupling_n),
        dense: opts.record_dense.then(|| DenseTrajectory {
            n_particles: n,
            segments: Vec::new(),
            kernel: Some(kernel),
        }),
        samples,
        next_sample: 0,
        raw: kernel.raw(),
        dissipated: 0.0,
        stats: RunStats::default(),
        dt_sum: 0.0,
    };

    let initial = state.clone();
    let mut state = state;
    let mut seg = Segment::new(state.frame(), kernel);
    let mut y = seg.pack(&state);
    let mut t = t0;
    let mut f0: Option<Vec<f64>> = None;
    let mut dt_try = ctrl.dt_init;
    run.record(&seg, t, &y, None);
    run.emit_samples(&seg, &empty_step(&y, t), t, &y);
    open_segment(&mut run, &seg, t, &y);

    let fail = |run: Run, error: IntegratorError, seg: &Segment, y: &[f64], t: f64, state: &ParticleSystem| {
        let mut last = state.clone();
        seg.unpack_into(&mut last, y, t);
        SimulateError {
            error,
            partial: Some(Box::new(run.finish(initial.clone(), last, kernel, ctrl))),
        }
    };

    while t < t_final {
        if seg.frame.len() == 1 {
            translate_to_end(&mut run, &seg, t, &y, t_final);
            let nd = seg.nd();
            let mut y_end = y.clone();
            for c in 0..nd {
                y_end[c] = y[c] + y[nd + c] * (t_final - t);
            }
            run.record(&seg, t_final, &y_end, Some(&y_end));
            y = y_end;
            t = t_final;
            break;
        }
        if run.stats.accepted >= ctrl.max_steps {
            let e = IntegratorError::StepBudget(ctrl.max_steps, t);
            return Err(fail(run, e, &seg, &y, t, &state));
        }
        let acc = match advance(&seg, t, &y, f0.as_deref(), dt_try, t_final - t, &ctrl) {
            Ok(a) => a,
            Err(e) => return Err(fail(run, e, &seg, &y, t, &state)),
        };
        run.stats.accepted += 1;
        run.stats.rejected += acc.rejected;
        let t1 = if acc.dt >= t_final - t { t_final } else { t + acc.dt };
        let mut dense = acc.dense;
        dense.t_end = t1;
        let candidates = detect_in_step(&seg, &dense, &acc.y1, &ctrl);
        let cut = candidates
            .iter()
            .find(|c| c.record.is_sticking())
            .map(|c| c.theta);
        let crosses = candidates
            .iter()
            .any(|c| c.record.is_collision() && cut.is_none_or(|th| c.theta < th));
        if crosses {
            // Accept a step across a collision only if halving it agrees.
            let err = halving_error(&seg, t, &y, f0.as_deref(), acc.dt, &acc.y1, &ctrl);
            if !err.is_some_and(|e| e <= 1.0) {
                run.stats.rejected += acc.rejected + 1;
                let factor = err.map_or(0.25, |e| (0.9 / e).clamp(0.1, 0.5));
                dt_try = acc.dt * factor;
                continue;
            }
        }
        for c in &candidates {
            if c.record.is_collision() && cut.is_none_or(|th| c.theta < th) {
                run.events.push(c.record.clone());
                run.request(c.record.t, t, t_final);
            }
        }
        match cut {
            None => {
                run.dt_sum += t1 - t;
                run.emit_samples(&seg, &dense, t1, &acc.y1);
                run.record(&seg, t1, &acc.y1, Some(&y));
                push_step(&mut run, dense);
                y = acc.y1;
                f0 = Some(acc.f1);
                t = t1;
                dt_try = acc.dt_next;
            }
            Some(theta) => {
                let t_cut = (dense.t0 + theta * dense.h).min(t1);
                let y_cut = if t_cut == t1 {
                    acc.y1.clone()
                } else {
                    dense.eval_vec(theta)
                };
                run.dt_sum += t_cut - t;
                dense.t_end = t_cut;
                run.emit_samples(&seg, &dense, t_cut, &y_cut);
                run.record(&seg, t_cut, &y_cut, Some(&y));
                push_step(&mut run, dense);
                seg.unpack_into(&mut state, &y_cut, t_cut);
                let window = theta + ctrl.event_bisect_tol / acc.dt;
                let mut sticks: Vec<&EventRecord> = candidates
                    .iter()
                    .filter(|c| c.record.is_sticking() && c.theta <= window)
                    .map(|c| &c.record)
                    .collect();
                sticks.sort_by(|a, b| a.members.cmp(&b.members));
                for ev in sticks {
                    if state.partition().same(ev.members[0], ev.members[1]) {
                        continue;
                    }
                    let mut ev = ev.clone();
                    // Members are reported by their current cluster labels.
                    let part = state.partition();
                    let label = |i: usize| (0..n).find(|&k| part.same(k, i)).unwrap_or(i);
                    let (a, b) = (label(ev.members[0]), label(ev.members[1]));
                    ev.members = vec![a.min(b), a.max(b)];
                    state = match merge(&state, &ev) {
                        Ok(s) => s,
                        Err(e) => return Err(fail(run, e, &seg, &y_cut, t_cut, &state)),
                    };
                    run.request(ev.t, t_cut, t_final);
                    run.events.push(ev);
                }
                seg = Segment::new(state.frame(), kernel);
                y = seg.pack(&state);
                let index = run.diag.len() - 1;
                run.diag.merges.push(MergeMark {
                    index,
                    t: t_cut,
                    r_after: seg.frame.velocity_diameter(&y[seg.nd()..2 * seg.nd()]),
                });
                run.stats.segments += 1;
                open_segment(&mut run, &seg, t_cut, &y);
                f0 = None;
                t = t_cut;
                dt_try = acc.dt_next.max(ctrl.dt_init);
            }
        }
        run.diag.quadrature_error += acc.q_error;
    }
    run.stats.segments += 1;
    if let Some(dt) = run.dense.as_mut() {
        if let Some(last) = dt.segments.last_mut() {
            last.t_end = t;
        }
    }
    seg.unpack_into(&mut state, &y, t);
    if let Err(e) = state.check_clusters() {
        return Err(fail(run, IntegratorError::Model(e), &seg, &y, t, &state));
    }
    Ok(run.finish(initial, state, kernel, ctrl))
}

fn empty_step(y: &[f64], t: f64) -> DenseStep {
    DenseStep {
        t0: t,
        h: 1.0,
        t_end: t,
        y0: y.to_vec(),
        coeffs: vec![0.0; 4 * y.len()],
    }
}

fn open_segment(run: &mut Run, seg: &Segment, t: f64, y: &[f64]) {
    if let Some(dt) = run.dense.as_mut() {
        if let Some(last) = dt.segments.last_mut() {
            last.t_end = t;
        }
        let nd = seg.nd();
        dt.segments.push(DenseSegment {
            t_start: t,
            t_end: t,
            members: seg.frame.members.clone(),
            mass: seg.frame.mass.clone(),
            coupling: seg.frame.coupling,
            dim: seg.frame.dim,
            steps: Vec::new(),
            start: Some((y[..nd].to_vec(), y[nd..2 * nd].to_vec())),
        });
    }
}

fn push_step(run: &mut Run, step: DenseStep) {
    if let Some(dt) = run.dense.as_mut() {
        if let Some(last) = dt.segments.last_mut() {
            last.t_end = step.t_end;
            last.steps.push(step);
        }
    }
}

/// A single cluster moves freely: `x(t) = x + v (t − t₀)`.
fn translate_to_end(run: &mut Run, seg: &Segment, t: f64, y: &[f64], t_final: f64) {
    let nd = seg.nd();
    while run.next_sample < run.samples.len() && run.samples[run.next_sample] <= t_final {
        let ts = run.samples[run.next_sample];
        let x: Vec<f64> = (0..nd).map(|c| y[c] + y[nd + c] * (ts - t)).collect();
        let (px, pv) = Run::sample_particles(&seg.frame, &x, &y[nd..2 * nd]);
        run.traj.push(ts, px, pv);
        run.next_sample += 1;
    }
    if let Some(dt) = run.dense.as_mut() {
        if let Some(last) = dt.segments.last_mut() {
            last.t_end = t_final;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Normalization;

    fn pair(w0: f64, u0: f64) -> ParticleSystem {
        ParticleSystem::new(
            vec![-w0 / 2.0, w0 / 2.0],
            vec![-u0 / 2.0, u0 / 2.0],
            1,
            Normalization::OverN,
        )
        .unwrap()
    }

    fn kernel(alpha: f64) -> WeightKernel {
        WeightKernel::singular(alpha).unwrap().with_floor(1e-10).unwrap()
    }

    #[test]
    fn single_particle_moves_freely() {
        let s = ParticleSystem::new(vec![0.5, -1.0], vec![2.0, 0.25], 2, Normalization::OverN)
            .unwrap();
        let opts = RunOptions::uniform(3.0, 6, true);
        let run = simulate_system(s, kernel(0.3), StepControl::for_scales(1.0, 1.0, 3.0), &opts)
            .unwrap();
        assert!(run.events.is_empty());
        assert_eq!(run.trajectory.len(), 7);
        for (k, &t) in run.trajectory.times.iter().enumerate() {
            assert_eq!(run.trajectory.x(k, 0), &[0.5 + 2.0 * t, -1.0 + 0.25 * t]);
        }
    }

    #[test]
    fn critical_pair_sticks_at_one() {
        // E = u0 + Ψ(w0) = 0 for α = 1/2, w0 = 1, u0 = −2.
        let opts = RunOptions::uniform(2.0, 20, true);
        let run = simulate_system(pair(1.0, -2.0), kernel(0.5), StepControl::for_scales(1.0, 2.0, 2.0), &opts)
            .unwrap();
        let st: Vec<_> = run.sticking_events().collect();
        assert_eq!(st.len(), 1, "{:?}", run.events);
        assert!((st[0].t - 1.0).abs() < 1e-3, "t = {}", st[0].t);
        assert_eq!(run.final_state.partition().cluster_count(), 1);
        assert_eq!(run.final_state.velocity(0), run.final_state.velocity(1));
        assert!(run.final_state.velocity(0)[0].abs() < 1e-12);
        assert_eq!(*run.trajectory.times.last().unwrap(), 2.0);
    }

    #[test]
    fn crossing_pair_records_one_collision() {
        let opts = RunOptions::uniform(20.0, 40, false);
        let run = simulate_system(pair(1.0, -3.0), kernel(0.5), StepControl::for_scales(1.0, 3.0, 20.0), &opts)
            .unwrap();
        assert_eq!(run.collision_events().count(), 1, "{:?}", run.events);
        assert_eq!(run.sticking_events().count(), 0);
        let c = run.collision_events().next().unwrap();
        assert!((c.relative_speed - 1.0).abs() < 1e-3, "{c:?}");
        let x = run.final_state.positions();
        let w = x[1] - x[0];
        assert!(w < 0.0);
        assert!((w.abs() - 0.25).abs() < 5e-3, "w = {w}");
    }

    #[test]
    fn runs_are_deterministic() {
        let s = ParticleSystem::new(
            vec![0.0, 0.3, 1.0, -0.7],
            vec![0.5, -0.5, 0.1, 0.2],
            1,
            Normalization::OverN,
        )
        .unwrap();
        let opts = RunOptions::uniform(2.0, 10, false);
        let c = StepControl::for_scales(1.0, 1.0, 2.0);
        let a = simulate_system(s.clone(), kernel(0.3), c, &opts).unwrap();
        let b = simulate_system(s, kernel(0.3), c, &opts).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.events, b.events);
    }
}
