//! Zero crossings, the slow-oscillation classifier, the first-return map and
//! fixed-point iteration for periodic orbits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;
use crate::trajectory::{
    derivative, extend_to_node, window_integral, InitialData, Side, Trajectory,
};

/// Node values this small count as exact zeros.
pub const ZERO_SNAP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub times: Vec<f64>,
    /// `+1` for an upward crossing, `-1` for a downward one.
    pub signs_after: Vec<i8>,
    pub gaps: Vec<f64>,
    /// Zero runs where the sign is the same on both sides.
    pub touches: Vec<f64>,
}

impl ZeroRecord {
    pub fn first_upward(&self) -> Option<f64> {
        self.iter().find(|&(_, s)| s > 0).map(|(t, _)| t)
    }

    pub fn first_downward(&self) -> Option<f64> {
        self.iter().find(|&(_, s)| s < 0).map(|(t, _)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, i8)> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.signs_after.iter().copied())
    }

    pub fn alternates(&self) -> bool {
        self.signs_after.windows(2).all(|w| w[0] != w[1])
    }
}

fn snapped_sign(v: f64) -> i8 {
    if v.abs() <= ZERO_SNAP {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Crossings of a sequence of `(t, value)` points. Equal consecutive times
/// model a jump; a sign change across it is placed at that time.
fn crossings(points: &[(f64, f64)]) -> ZeroRecord {
    let mut rec = ZeroRecord::default();
    let mut last: Option<(i8, usize)> = None;
    let mut zero_run: Option<usize> = None;
    for (i, &(t, v)) in points.iter().enumerate() {
        let s = snapped_sign(v);
        if s == 0 {
            zero_run.get_or_insert(i);
            continue;
        }
        if let Some((ls, li)) = last {
            if s != ls {
                let time = match zero_run {
                    Some(z) => points[z].0,
                    None => {
                        let (ta, va) = points[li];
                        if t == ta {
                            t
                        } else {
                            ta + (t - ta) * va / (va - v)
                        }
                    }
                };
                rec.times.push(time);
                rec.signs_after.push(s);
            } else if let Some(z) = zero_run {
                rec.touches.push(points[z].0);
            }
        }
        last = Some((s, i));
        zero_run = None;
    }
    rec.gaps = rec.times.windows(2).map(|w| w[1] - w[0]).collect();
    rec
}

/// Crossings of `traj` on `[from, to]` by linear interpolation between
/// nodes. The left limit at 0 is used only when `from < 0`.
pub fn zeros(traj: &Trajectory, from: f64, to: f64) -> ZeroRecord {
    let g = traj.grid;
    let k = g.steps_per_unit as f64;
    let lo = ((from * k - 1e-9).ceil() as i64).max(traj.start);
    let hi = ((to * k + 1e-9).floor() as i64).min(traj.end_node());
    let mut pts = Vec::with_capacity((hi - lo + 2).max(0) as usize);
    for n in lo..=hi {
        if n == 0 && lo < 0 {
            if let Some((left, _)) = traj.jump_at_zero {
                pts.push((0.0, left));
            }
        }
        pts.push((g.time(n), traj.node_value(n)));
    }
    crossings(&pts)
}

/// Zeros of initial data on its whole interval.
pub fn zeros_of_data(b: &InitialData) -> ZeroRecord {
    let pts: Vec<(f64, f64)> = b.times().zip(b.samples.iter().copied()).collect();
    crossings(&pts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub interval: (f64, f64),
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationVerdict {
    pub slowly_oscillating: bool,
    pub min_gap: f64,
    pub max_gap: f64,
    pub zero_count: usize,
    /// No crossing at all in the window.
    pub degenerate: bool,
    pub gap_tolerance: f64,
    pub failures: Vec<Failure>,
}

/// Slow-oscillation test on `window`: consecutive zeros at least
/// `1 - eps/2 - 2 dt` apart and a strict sign change at every zero.
pub fn classify(traj: &Trajectory, window: (f64, f64)) -> Result<OscillationVerdict> {
    let (from, to) = window;
    if !(to - from >= 3.0) {
        return Err(Error::Domain(format!(
            "classification window [{from}, {to}] is shorter than 3"
        )));
    }
    let g = traj.grid;
    let gap_tolerance = 2.0 * g.dt();
    let rec = zeros(traj, from, to);
    let min_allowed = 1.0 - g.eps / 2.0 - gap_tolerance;
    let mut failures = Vec::new();
    for (w, gap) in rec.times.windows(2).zip(&rec.gaps) {
        if *gap < min_allowed {
            failures.push(Failure {
                interval: (w[0], w[1]),
                reason: format!("zero gap {gap:.6} below {min_allowed:.6}"),
            });
        }
    }
    for &t in &rec.touches {
        failures.push(Failure {
            interval: (t, t),
            reason: "touches zero without changing sign".into(),
        });
    }
    if !rec.alternates() {
        failures.push(Failure {
            interval: window,
            reason: "crossing directions do not alternate".into(),
        });
    }
    let min_gap = rec.gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let max_gap = rec.gaps.iter().copied().fold(0.0, f64::max);
    Ok(OscillationVerdict {
        slowly_oscillating: failures.is_empty(),
        min_gap,
        max_gap,
        zero_count: rec.times.len(),
        degenerate: rec.times.is_empty(),
        gap_tolerance,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnMap {
    pub segment: InitialData,
    pub z1: f64,
}

/// Latest time searched for the first upward crossing.
pub const Z1_HORIZON: f64 = 3.0;

/// First upward crossing of the continuation in `(0, 3]`, together with the
/// continuation itself (extended past `z1 + 1 + eps/2`).
pub fn first_return(b: &InitialData, f: &NonlinearitySpec) -> Result<(Trajectory, f64)> {
    let g = b.grid;
    let end = ((Z1_HORIZON + 1.0 + g.eps) * g.steps_per_unit as f64).ceil() as i64 + 2;
    let x = extend_to_node(b, f, end)?;
    let z1 = zeros(&x, 0.0, Z1_HORIZON)
        .iter()
        .find(|&(t, s)| s > 0 && t > 0.0)
        .map(|(t, _)| t)
        .ok_or(Error::Divergence {
            horizon: Z1_HORIZON,
        })?;
    Ok((x, z1))
}

/// The return map: the continuation shifted by `z1 + 1 + eps/2` and
/// resampled on the initial-data nodes; its left endpoint is exactly 0.
pub fn poincare(b: &InitialData, f: &NonlinearitySpec) -> Result<ReturnMap> {
    let (x, z1) = first_return(b, f)?;
    Ok(ReturnMap {
        segment: resample_after(&x, z1),
        z1,
    })
}

fn resample_after(x: &Trajectory, z1: f64) -> InitialData {
    let g = x.grid;
    let shift = z1 + 1.0 + g.eps / 2.0;
    let n0 = g.history_intervals() as i64;
    let mut samples: Vec<f64> = (0..=n0)
        .map(|i| x.value_at(shift + g.time(i - n0), Side::Right))
        .collect();
    samples[0] = 0.0;
    InitialData { grid: g, samples }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Step `b <- (1 - w) b + w F(b)`; 1 is plain iteration.
    #[serde(default = "unit")]
    pub relaxation: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            relaxation: 1.0,
        }
    }
}

/// Segments smaller than this in sup norm count as collapse onto 0.
pub const COLLAPSE_NORM: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Continuation nodes spanning one period from `z_start`.
    pub one_period: Trajectory,
    pub z_start: f64,
    pub period: f64,
    /// Larger of the closure defect and the equation defect.
    pub residual: f64,
    /// `sup |F(b*) - b*|` for the returned fixed point `b*`.
    pub closure_defect: f64,
    /// Largest nodewise defect of the recurrence over the period.
    pub equation_defect: f64,
    /// `|b*(0) - x_{b*}(0)|`, the jump left by resampling.
    pub closure_jump: f64,
    pub extremes: (f64, f64),
    pub tau: f64,
    pub iterations: usize,
    pub segment: InitialData,
    pub distance_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub eps: f64,
    pub period: f64,
    pub residual: f64,
    pub extremes: (f64, f64),
    pub iterations: usize,
    pub tau: f64,
}

impl PeriodicOrbit {
    /// Periodic evaluation by linear interpolation of the stored period.
    pub fn eval(&self, t: f64) -> f64 {
        let s = self.z_start + (t - self.z_start).rem_euclid(self.period);
        self.one_period.value_at(s, Side::Right)
    }

    /// Upward and downward crossing times within the stored period.
    pub fn crossings(&self) -> ZeroRecord {
        zeros(&self.one_period, self.z_start, self.z_start + self.period)
    }

    pub fn summary(&self) -> OrbitSummary {
        OrbitSummary {
            eps: self.one_period.grid.eps,
            period: self.period,
            residual: self.residual,
            extremes: self.extremes,
            iterations: self.iterations,
            tau: self.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum PeriodicSearch {
    Periodic(Box<PeriodicOrbit>),
    Equilibrium {
        iterations: usize,
        distance_history: Vec<f64>,
    },
    NotConverged {
        iterations: usize,
        distance_history: Vec<f64>,
        last: InitialData,
    },
}

impl PeriodicSearch {
    pub fn orbit(&self) -> Option<&PeriodicOrbit> {
        match self {
            PeriodicSearch::Periodic(o) => Some(o),
            _ => None,
        }
    }
}

fn sup_distance(a: &InitialData, b: &InitialData) -> f64 {
    a.samples
        .iter()
        .zip(&b.samples)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Iterates the (optionally relaxed) return map until `sup |F(b) - b| < tol`. Geometric shrinking of the segments is treated as collapse onto the
/// trivial equilibrium rather than convergence.
pub fn find_periodic(
    b0: &InitialData,
    f: &NonlinearitySpec,
    opts: PeriodicOptions,
) -> Result<PeriodicSearch> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 || !(opts.relaxation > 0.0 && opts.relaxation <= 1.0)
    {
        return Err(Error::Config(
            "tol must be positive, max_iter at least 1 and relaxation in (0, 1]".into(),
        ));
    }
    let w = opts.relaxation;
    let mut b = b0.clone();
    let mut history = Vec::new();
    for k in 1..=opts.max_iter {
        let next = match poincare(&b, f) {
            Ok(r) => r.segment,
            Err(Error::Divergence { .. }) if b.sup_norm() < 1e-6 => {
                return Ok(PeriodicSearch::Equilibrium {
                    iterations: k,
                    distance_history: history,
                });
            }
            Err(e) => return Err(e),
        };
        let dist = sup_distance(&next, &b);
        history.push(dist);
        let amp = next.sup_norm();
        if amp < COLLAPSE_NORM {
            return Ok(PeriodicSearch::Equilibrium {
                iterations: k,
                distance_history: history,
            });
        }
        let shrinking = amp < (1.0 - 1e-3) * b.sup_norm();
        if dist < opts.tol && !shrinking {
            let orbit = orbit_from_segment(next, f, k, history)?;
            return Ok(PeriodicSearch::Periodic(Box::new(orbit)));
        }
        b = if w == 1.0 {
            next
        } else {
            let mixed = b
                .samples
                .iter()
                .zip(&next.samples)
                .map(|(x, y)| (1.0 - w) * x + w * y)
                .collect();
            InitialData::from_samples(b.grid, mixed)?
        };
    }
    Ok(PeriodicSearch::NotConverged {
        iterations: opts.max_iter,
        distance_history: history,
        last: b,
    })
}

/// Rebuilds one period of the continuation of a (near) fixed point `b*` and
/// measures its defects.
pub fn orbit_from_segment(
    segment: InitialData,
    f: &NonlinearitySpec,
    iterations: usize,
    distance_history: Vec<f64>,
) -> Result<PeriodicOrbit> {
    let g = segment.grid;
    let k = g.steps_per_unit as f64;
    let horizon = 7.0;
    let x = extend_to_node(&segment, f, (horizon * k).ceil() as i64)?;
    let rec = zeros(&x, 0.0, horizon);
    let ups: Vec<f64> = rec
        .iter()
        .filter(|&(t, s)| s > 0 && t > 0.0)
        .map(|(t, _)| t)
        .collect();
    if ups.len() < 2 {
        return Err(Error::Divergence { horizon });
    }
    let (z1, z3) = (ups[0], ups[1]);
    let period = z3 - z1;

    let again = resample_after(&x, z1);
    let closure_defect = sup_distance(&again, &segment);

    let from = g.node_floor(z1);
    let to = (z3 * k).ceil() as i64;
    let one_period = x.slice(from, to)?;
    let mut equation_defect: f64 = 0.0;
    for n in from..=to {
        let w = window_integral(&x, f, g.time(n))?;
        equation_defect = equation_defect.max((w - x.node_value(n)).abs());
    }
    let (lo, hi) = one_period
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let tau = zeros_of_data(&segment)
        .first_downward()
        .map_or(f64::NAN, |t| -t);
    let closure_jump = x.jump_at_zero.map_or(0.0, |(l, r)| (l - r).abs());
    Ok(PeriodicOrbit {
        one_period,
        z_start: z1,
        period,
        residual: closure_defect.max(equation_defect),
        closure_defect,
        equation_defect,
        closure_jump,
        extremes: (lo, hi),
        tau,
        iterations,
        segment,
        distance_history,
    })
}

/// Left and right slopes of the continuation at its first upward zero.
pub fn one_sided_slopes_at_z1(b: &InitialData, f: &NonlinearitySpec) -> Result<(f64, f64)> {
    let (x, z1) = first_return(b, f)?;
    let d = derivative(&x, f, z1)?;
    Ok((d.left, d.right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::trajectory::extend;
    use std::f64::consts::PI;

    fn sampled(eps: f64, m: usize, to: f64, x: impl Fn(f64) -> f64) -> Trajectory {
        let g = make_grid(eps, m).unwrap();
        let n_end = g.node_of(to).unwrap();
        Trajectory {
            grid: g,
            start: 0,
            samples: (0..=n_end).map(|n| x(g.time(n))).collect(),
            jump_at_zero: None,
        }
    }

    #[test]
    fn zeros_of_sine() {
        let tr = sampled(0.3, 3, 3.5, |t| (PI * t).sin());
        let rec = zeros(&tr, 0.0, 3.5);
        let dt = tr.grid.dt();
        // node 0 is an exact zero at the start with nothing before it
        assert_eq!(rec.times.len(), 3);
        for (t, want) in rec.times.iter().zip([1.0, 2.0, 3.0]) {
            assert!((t - want).abs() <= dt * dt * PI * PI / 8.0 + 1e-12);
        }
        assert_eq!(rec.signs_after, vec![-1, 1, -1]);
    }

    #[test]
    fn constant_has_no_zeros() {
        let tr = sampled(0.3, 3, 3.0, |_| 2.0);
        assert_eq!(zeros(&tr, 0.0, 3.0), ZeroRecord::default());
    }

    #[test]
    fn exact_zero_nodes_count_once_at_left_bracket() {
        let rec = crossings(&[(0.0, 1.0), (1.0, 0.0), (2.0, 1e-15), (3.0, -1.0)]);
        assert_eq!(rec.times, vec![1.0]);
        let touch = crossings(&[(0.0, 1.0), (1.0, 0.0), (2.0, 1.0)]);
        assert!(touch.times.is_empty());
        assert_eq!(touch.touches, vec![1.0]);
    }

    #[test]
    fn fast_sine_is_not_slowly_oscillating() {
        let tr = sampled(0.25, 10, 4.0, |t| (4.0 * PI * t + 0.1).sin());
        let v = classify(&tr, (0.0, 4.0)).unwrap();
        assert!(!v.slowly_oscillating);
        assert!((v.min_gap - 0.25).abs() < 1e-3);
    }

    #[test]
    fn zero_trajectory_is_degenerate() {
        let tr = sampled(0.25, 10, 4.0, |_| 0.0);
        let v = classify(&tr, (0.0, 4.0)).unwrap();
        assert!(v.slowly_oscillating && v.degenerate && v.zero_count == 0);
    }

    #[test]
    fn short_window_rejected() {
        let tr = sampled(0.25, 10, 4.0, |_| 0.0);
        assert!(classify(&tr, (0.0, 2.0)).is_err());
    }

    #[test]
    fn return_segment_starts_at_zero() {
        let g = make_grid(0.3, 12).unwrap();
        let f = NonlinearitySpec::atan_shifted();
        let b = InitialData::constant(g, 1.0).unwrap();
        let r = poincare(&b, &f).unwrap();
        assert_eq!(r.segment.samples[0], 0.0);
        assert!(r.z1 > 0.0 && r.z1 <= Z1_HORIZON);
        let x = extend(&b, &f, 3.0).unwrap();
        assert!(x.value_at(r.z1, Side::Right).abs() < 1e-12);
    }

    #[test]
    fn weak_linear_feedback_collapses() {
        let g = make_grid(0.3, 12).unwrap();
        let f = NonlinearitySpec::linear(-0.5);
        let b = InitialData::from_fn(g, |t| (PI * (t + 1.15)).sin()).unwrap();
        match find_periodic(&b, &f, PeriodicOptions::default()) {
            Ok(PeriodicSearch::Equilibrium { .. }) | Err(Error::Divergence { .. }) => {}
            other => panic!("expected collapse, got {other:?}"),
        }
    }

    #[test]
    fn no_zero_is_divergence() {
        let g = make_grid(0.3, 12).unwrap();
        let f = NonlinearitySpec::linear(-0.5);
        let b = InitialData::constant(g, 0.0).unwrap();
        assert!(matches!(poincare(&b, &f), Err(Error::Divergence { .. })));
    }

    #[test]
    fn relaxed_iteration_finds_the_same_orbit() {
        let g = make_grid(0.3, 12).unwrap();
        let f = NonlinearitySpec::atan_shifted();
        let b = InitialData::constant(g, 1.0).unwrap();
        let plain = find_periodic(&b, &f, PeriodicOptions::default()).unwrap();
        let opts = PeriodicOptions {
            relaxation: 0.5,
            ..PeriodicOptions::default()
        };
        let relaxed = find_periodic(&b, &f, opts).unwrap();
        let (p, r) = (plain.orbit().unwrap(), relaxed.orbit().unwrap());
        assert!((p.period - r.period).abs() < 1e-6);
        assert!((p.extremes.1 - r.extremes.1).abs() < 1e-6);
        for w in [0.0, 1.5] {
            let bad = PeriodicOptions {
                relaxation: w,
                ..PeriodicOptions::default()
            };
            assert!(matches!(find_periodic(&b, &f, bad), Err(Error::Config(_))));
        }
    }
}
