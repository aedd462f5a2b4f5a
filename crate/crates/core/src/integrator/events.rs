//! Collision and sticking detection on the dense output of an accepted step.
//!
//! A pair of clusters produces an event when its distance enters the ball of
//! radius `eps_x` during the step. The entry time is found by bisection on the
//! dense output. Classification then uses the local two-body first integral:
//! an approaching pair at distance `s` with closing speed `|Δv|` reaches zero
//! relative velocity exactly at contact when `|Δv| = κ Ψ(s)`, with
//! `κ = c (m_I + m_J)`. The excess `|Δv| − κ Ψ(s)` is therefore the impact
//! speed the pair would carry through the coincidence; it is below `eps_v` for
//! sticking and of order one for a crossing.

use serde::{Deserialize, Serialize};

use super::control::StepControl;
use super::stepper::{DenseStep, Segment, StepOutcome};
use super::IntegratorError;
use crate::model::ParticleSystem;
use crate::weights::{KernelKind, WeightKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Collision,
    Sticking,
}

/// A timestamped collision or sticking of two clusters.
///
/// `members` holds the smallest particle index of each cluster, ascending.
/// For sticking, `t` is the contact time predicted by the local singular
/// model from the detection point `t_detect`, where the merge is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub members: Vec<usize>,
    pub t_detect: f64,
    pub relative_speed: f64,
    pub excess_speed: f64,
}

impl EventRecord {
    pub fn is_sticking(&self) -> bool {
        self.kind == EventKind::Sticking
    }

    pub fn is_collision(&self) -> bool {
        self.kind == EventKind::Collision
    }
}

/// Candidate found inside one step, before the simulation loop acts on it.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EventCandidate {
    pub record: EventRecord,
    /// Cluster slots in the segment frame.
    pub slots: (usize, usize),
    /// Fraction of the step at which the pair entered the `eps_x` ball.
    pub theta: f64,
}

/// Relative position and velocity `(x_b − x_a, v_b − v_a)` at `theta`.
pub(crate) fn pair_state(
    seg: &Segment,
    step: &DenseStep,
    a: usize,
    b: usize,
    theta: f64,
) -> (Vec<f64>, Vec<f64>) {
    let d = seg.frame.dim;
    let nd = seg.nd();
    let mut dx = vec![0.0; d];
    let mut dv = vec![0.0; d];
    for c in 0..d {
        dx[c] = step.component(b * d + c, theta) - step.component(a * d + c, theta);
        dv[c] = step.component(nd + b * d + c, theta) - step.component(nd + a * d + c, theta);
    }
    (dx, dv)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

const SCAN_POINTS: usize = 16;

/// Scans every inter-cluster pair of an accepted step for entries into the
/// `eps_x` ball. Candidates are returned sorted by entry time, ties by slots.
pub(crate) fn detect_in_step(
    seg: &Segment,
    step: &DenseStep,
    y1: &[f64],
    ctrl: &StepControl,
) -> Vec<EventCandidate> {
    let frame = &seg.frame;
    let n = frame.len();
    if n < 2 {
        return Vec::new();
    }
    let d = frame.dim;
    let nd = seg.nd();
    let y0 = &step.y0;
    let h = step.t_end - step.t0;
    let theta_end = if step.h > 0.0 { h / step.h } else { 1.0 };
    // Velocities stay in the convex hull of their values at the start of the
    // step, so relative speeds are bounded by the hull diameter.
    let mut vmax: f64 = 0.0;
    for k in 0..n {
        for yy in [y0.as_slice(), y1] {
            vmax = vmax.max(norm(&yy[nd + k * d..nd + (k + 1) * d]));
        }
    }
    let reach = 2.2 * vmax * h + ctrl.eps_x;

    let mut out = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let dist = |y: &[f64]| {
                norm(
                    &(0..d)
                        .map(|c| y[b * d + c] - y[a * d + c])
                        .collect::<Vec<_>>(),
                )
            };
            let d0 = dist(y0);
            let d1 = dist(y1);
            if d0.min(d1) > reach {
                continue;
            }
            if d0 < ctrl.eps_x {
                // Entered during an earlier step.
                continue;
            }
            let g = |theta: f64| norm(&pair_state(seg, step, a, b, theta).0);
            let hit = if d1 < ctrl.eps_x {
                Some(theta_end)
            } else {
                first_dip(&g, theta_end, ctrl.eps_x, 2.2 * vmax * h / SCAN_POINTS as f64)
            };
            let Some(theta_hi) = hit else { continue };
            let theta = bisect_entry(&g, 0.0, theta_hi, ctrl.eps_x, ctrl.event_bisect_tol / step.h);
            if let Some(c) = classify(seg, step, a, b, theta, ctrl) {
                out.push(c);
            }
        }
    }
    out.sort_by(|p, q| {
        p.theta
            .total_cmp(&q.theta)
            .then(p.slots.cmp(&q.slots))
    });
    out
}

/// Events of one accepted step taken from `prev` with [`step_adaptive`].
///
/// `kernel` must be the kernel the step was taken with. Records are sorted by
/// the time at which each pair entered the `eps_x` ball.
pub fn detect_events(
    prev: &ParticleSystem,
    step: &StepOutcome,
    kernel: &WeightKernel,
    ctrl: &StepControl,
) -> Vec<EventRecord> {
    let seg = Segment::new(prev.frame(), *kernel);
    let y1 = seg.pack(&step.state);
    detect_in_step(&seg, &step.dense, &y1, ctrl)
        .into_iter()
        .map(|c| c.record)
        .collect()
}

/// Returns a `θ` with `g(θ) < eps` if the distance dips below `eps` inside
/// `(0, theta_end)`, scanning the dense output and refining its minimum.
/// `slack` bounds the change of `g` between neighbouring scan points.
fn first_dip(g: &dyn Fn(f64) -> f64, theta_end: f64, eps: f64, slack: f64) -> Option<f64> {
    let mut best = (f64::INFINITY, 0usize);
    let samples: Vec<f64> = (0..=SCAN_POINTS)
        .map(|k| theta_end * k as f64 / SCAN_POINTS as f64)
        .collect();
    for (k, &th) in samples.iter().enumerate() {
        let v = g(th);
        if v < eps {
            return Some(th);
        }
        if v < best.0 {
            best = (v, k);
        }
    }
    if best.0 > eps + slack {
        return None;
    }
    let lo = samples[best.1.saturating_sub(1)];
    let hi = samples[(best.1 + 1).min(SCAN_POINTS)];
    // Golden-section search for the minimum inside the bracket.
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (lo, hi);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..80 {
        if f1.min(f2) < eps {
            return Some(if f1 < f2 { x1 } else { x2 });
        }
        if hi - lo < 1e-15 {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = g(x2);
        }
    }
    None
}

/// Bisection for the entry point: `g(lo) ≥ eps > g(hi)`.
fn bisect_entry(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, eps: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn classify(
    seg: &Segment,
    step: &DenseStep,
    a: usize,
    b: usize,
    theta: f64,
    ctrl: &StepControl,
) -> Option<EventCandidate> {
    let frame = &seg.frame;
    let (dx, dv) = pair_state(seg, step, a, b, theta);
    let s = norm(&dx);
    let speed = norm(&dv);
    let kappa = frame.kappa(a, b);
    // The run has not been below the floor yet, so the raw primitive applies.
    let capture = kappa * seg.kernel.raw().floored_primitive(s);
    let excess = speed - capture;
    let t_detect = step.t0 + theta * step.h;
    let members = {
        let (la, lb) = (frame.label(a), frame.label(b));
        vec![la.min(lb), la.max(lb)]
    };
    let (kind, t) = if excess <= ctrl.eps_v {
        (EventKind::Sticking, t_detect + contact_delay(seg, s, kappa))
    } else {
        (EventKind::Collision, collision_time(seg, step, a, b, theta, s, speed))
    };
    Some(EventCandidate {
        record: EventRecord {
            t,
            kind,
            members,
            t_detect,
            relative_speed: speed,
            excess_speed: excess,
        },
        slots: (a, b),
        theta,
    })
}

/// Time left before contact for a critical pair at distance `s`:
/// `(1 − α) s^α / (α κ)` from `s' = −κ Ψ(s)`.
fn contact_delay(seg: &Segment, s: f64, kappa: f64) -> f64 {
    match seg.kernel.kind() {
        KernelKind::Singular { alpha } if alpha < 1.0 && kappa > 0.0 => {
            (1.0 - alpha) * s.powf(alpha) / (alpha * kappa)
        }
        _ => 0.0,
    }
}

/// Time of closest approach after the entry point: bisection on the sign of
/// `Δx·Δv` when it turns positive within the step, otherwise a straight-line
/// extrapolation from the entry point.
fn collision_time(
    seg: &Segment,
    step: &DenseStep,
    a: usize,
    b: usize,
    theta: f64,
    s: f64,
    speed: f64,
) -> f64 {
    let theta_end = (step.t_end - step.t0) / step.h;
    let radial = |th: f64| {
        let (dx, dv) = pair_state(seg, step, a, b, th);
        dot(&dx, &dv)
    };
    if radial(theta_end) > 0.0 && radial(theta) < 0.0 {
        let (mut lo, mut hi) = (theta, theta_end);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (hi - lo) * step.h <= 1e-15 * step.t0.abs().max(1.0) || mid <= lo || mid >= hi {
                break;
            }
            if radial(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        step.t0 + 0.5 * (lo + hi) * step.h
    } else if speed > 0.0 {
        step.t0 + theta * step.h + s / speed
    } else {
        step.t0 + theta * step.h
    }
}

/// Unites the clusters named by a sticking event and places the union at the
/// multiplicity-weighted mean of their positions and velocities. The
/// partition logs the merge at `event.t_detect`, the time of the state.
pub fn merge(state: &ParticleSystem, event: &EventRecord) -> Result<ParticleSystem, IntegratorError> {
    if event.kind != EventKind::Sticking {
        return Err(IntegratorError::InvalidMerge(
            "only sticking events merge clusters".into(),
        ));
    }
    let [i, j] = event.members[..] else {
        return Err(IntegratorError::InvalidMerge(format!(
            "expected two members, got {:?}",
            event.members
        )));
    };
    let n = state.n_particles();
    if i >= n || j >= n {
        return Err(IntegratorError::InvalidMerge(format!(
            "members {:?} out of range for {n} particles",
            event.members
        )));
    }
    let p = state.partition();
    if p.same(i, j) {
        return Err(IntegratorError::InvalidMerge(format!(
            "particles {i} and {j} already share a cluster"
        )));
    }
    let (mi, mj) = (p.size_of(i) as f64, p.size_of(j) as f64);
    let d = state.dim();
    let total = mi + mj;
    let x: Vec<f64> = (0..d)
        .map(|c| (mi * state.position(i)[c] + mj * state.position(j)[c]) / total)
        .collect();
    let v: Vec<f64> = (0..d)
        .map(|c| (mi * state.velocity(i)[c] + mj * state.velocity(j)[c]) / total)
        .collect();
    let mut next = state.clone();
    next.partition_mut()
        .union(i, j, event.t_detect)
        .map_err(|e| IntegratorError::InvalidMerge(e.to_string()))?;
    let root = next.partition().find(i);
    let members: Vec<usize> = (0..n).filter(|&k| next.partition().find(k) == root).collect();
    next.set_cluster_state(&members, &x, &v);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClusterPartition, Normalization};

    fn sticking(i: usize, j: usize) -> EventRecord {
        EventRecord {
            t: 0.0,
            kind: EventKind::Sticking,
            members: vec![i, j],
            t_detect: 0.0,
            relative_speed: 0.0,
            excess_speed: 0.0,
        }
    }

    #[test]
    fn merge_identical_states() {
        let s = ParticleSystem::new(vec![0.5, 0.5], vec![-1.0, -1.0], 1, Normalization::OverN)
            .unwrap();
        let m = merge(&s, &sticking(0, 1)).unwrap();
        assert_eq!(m.positions(), &[0.5, 0.5]);
        assert_eq!(m.velocities(), &[-1.0, -1.0]);
        assert_eq!(m.partition().size_of(0), 2);
    }

    #[test]
    fn merge_takes_arithmetic_mean() {
        let (ex, ev) = (1e-8, 1e-6);
        let s = ParticleSystem::new(vec![0.0, ex / 2.0], vec![0.0, ev / 2.0], 1, Normalization::OverN)
            .unwrap();
        let m = merge(&s, &sticking(0, 1)).unwrap();
        assert_eq!(m.positions()[0], ex / 4.0);
        assert_eq!(m.velocities()[1], ev / 4.0);
        m.check_clusters().unwrap();
    }

    #[test]
    fn merge_weights_by_multiplicity() {
        let eps = 1e-7;
        let mut p = ClusterPartition::singletons(3);
        p.union(0, 1, 0.0).unwrap();
        let s = ParticleSystem::new(
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 3.0 * eps],
            1,
            Normalization::OverN,
        )
        .unwrap()
        .with_partition(p)
        .unwrap();
        let before = crate::model::momentum(&s)[0];
        let m = merge(&s, &sticking(1, 2)).unwrap();
        // (2·0 + 1·3ε)/3 = ε
        assert!((m.velocities()[0] - eps).abs() < 1e-22);
        assert_eq!(m.partition().cluster_count(), 1);
        assert!((crate::model::momentum(&m)[0] - before).abs() < 1e-21);
    }

    #[test]
    fn merge_rejects_same_cluster() {
        let mut p = ClusterPartition::singletons(2);
        p.union(0, 1, 0.0).unwrap();
        let s = ParticleSystem::new(vec![0.0, 0.0], vec![0.0, 0.0], 1, Normalization::OverN)
            .unwrap()
            .with_partition(p)
            .unwrap();
        assert!(matches!(merge(&s, &sticking(0, 1)), Err(IntegratorError::InvalidMerge(_))));
        let mut c = sticking(0, 1);
        c.kind = EventKind::Collision;
        assert!(merge(&s, &c).is_err());
    }
}
