//! The small-window limit: comparison of periodic orbits with the square
//! wave of the difference equation `b(t) = f(b(t - 1))`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::make_default_grid;
use crate::nonlinearity::{period_two_points, NonlinearitySpec};
use crate::oscillation::{
    find_periodic, orbit_from_segment, PeriodicOptions, PeriodicOrbit, PeriodicSearch,
};
use crate::quadrature::integrate_uniform;
use crate::trajectory::{InitialData, Trajectory};

/// `kappa0` when `floor(t)` is odd, `-kappa0` when even.
pub fn square_wave(kappa0: f64, t: f64) -> f64 {
    square_wave_levels(
        Levels {
            lo: -kappa0,
            hi: kappa0,
        },
        t,
    )
}

/// Plateau values of the limiting square wave: `lo` on even unit
/// intervals, `hi` on odd ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub lo: f64,
    pub hi: f64,
}

pub fn square_wave_levels(levels: Levels, t: f64) -> f64 {
    if (t.floor() as i64).rem_euclid(2) == 1 {
        levels.hi
    } else {
        levels.lo
    }
}

/// `-(2a / (k pi eps)) sin(k pi eps / 2)`
pub fn lambda_ak(a: f64, k: u32, eps: f64) -> f64 {
    let k = k as f64;
    -(2.0 * a / (k * PI * eps)) * (k * PI * eps / 2.0).sin()
}

/// Outermost period-two points of `f` on its evaluation domain.
pub fn plateau_levels(f: &NonlinearitySpec) -> Result<Levels> {
    let roots = period_two_points(f, f.eval_domain, 1e-4)?;
    match (roots.first(), roots.last()) {
        (Some(&lo), Some(&hi)) if lo < 0.0 && hi > 0.0 => Ok(Levels { lo, hi }),
        _ => Err(Error::NoRoot(format!(
            "no nontrivial period-two pair of f, roots {roots:?}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedOrbit {
    /// Phase of the orbit placed at `t = 0`, in `(-period/2, period/2]`.
    pub shift: f64,
    /// Orbit samples on the nodes of `[0, 2]`.
    pub trajectory: Trajectory,
    pub l1_error: f64,
}

/// Shifts the orbit so that one of its two zeros per period sits at 0,
/// choosing the zero that minimises the L1 distance to the square wave on
/// `[0, 2]`.
pub fn align_phase(orbit: &PeriodicOrbit, levels: Levels) -> Result<AlignedOrbit> {
    let g = orbit.one_period.grid;
    let rec = orbit.crossings();
    if rec.times.is_empty() && orbit.eval(orbit.z_start) != 0.0 {
        return Err(Error::NoRoot("orbit has no zero within its period".into()));
    }
    // a zero sitting exactly on the first node is not reported as a crossing
    let candidates = std::iter::once(orbit.z_start).chain(rec.times.iter().copied());
    let n2 = 2 * g.steps_per_unit;
    let k = g.steps_per_unit;
    let mut best: Option<AlignedOrbit> = None;
    for c in candidates {
        let samples: Vec<f64> = (0..=n2).map(|n| orbit.eval(c + g.time(n as i64))).collect();
        let l1 = l1_distance(&samples, k, levels, g.dt());
        if best.as_ref().is_none_or(|b| l1 < b.l1_error) {
            let p = orbit.period;
            let mut shift = c.rem_euclid(p);
            if shift > p / 2.0 {
                shift -= p;
            }
            best = Some(AlignedOrbit {
                shift,
                trajectory: Trajectory {
                    grid: g,
                    start: 0,
                    samples,
                    jump_at_zero: None,
                },
                l1_error: l1,
            });
        }
    }
    Ok(best.unwrap())
}

fn l1_distance(samples: &[f64], k: usize, levels: Levels, dt: f64) -> f64 {
    let first: Vec<f64> = samples[..=k]
        .iter()
        .map(|v| (v - levels.lo).abs())
        .collect();
    let second: Vec<f64> = samples[k..].iter().map(|v| (v - levels.hi).abs()).collect();
    integrate_uniform(&first, dt) + integrate_uniform(&second, dt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSweepRow {
    pub eps: f64,
    pub period: f64,
    pub sup_error: f64,
    pub l1_error: f64,
    /// `max(orbit) - hi`
    pub overshoot: f64,
    /// `min(orbit) - lo`; negative when the orbit dips below the lower plateau.
    pub undershoot: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub levels: Levels,
    pub interval: (f64, f64),
    pub rows: Vec<LimitSweepRow>,
    pub orbits: Vec<PeriodicOrbit>,
}

/// Default comparison interval, as far from the integers as possible.
pub const DEFAULT_INTERVAL: (f64, f64) = (1.25, 1.75);

/// One periodic orbit per `eps` (default grid, constant initial data 1),
/// each aligned to the square wave and measured against it. Rows run in
/// parallel.
pub fn sweep(
    f: &NonlinearitySpec,
    eps_list: &[f64],
    interval: (f64, f64),
    opts: PeriodicOptions,
) -> Result<Sweep> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Config(
            "eps list must be non-empty and strictly decreasing".into(),
        ));
    }
    let (a, b) = interval;
    let avoids_integers = a.floor() == b.floor() && a.fract() > 0.0 && b.fract() > 0.0;
    if !(a < b && a > 0.0 && b < 2.0 && avoids_integers) {
        return Err(Error::Config(format!(
            "interval [{a}, {b}] must lie inside (0, 1) or (1, 2)"
        )));
    }
    let levels = plateau_levels(f)?;
    let results: Vec<Result<(LimitSweepRow, PeriodicOrbit)>> = eps_list
        .par_iter()
        .map(|&eps| sweep_row(f, eps, interval, levels, opts))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut orbits = Vec::with_capacity(results.len());
    for r in results {
        let (row, orbit) = r?;
        rows.push(row);
        orbits.push(orbit);
    }
    Ok(Sweep {
        levels,
        interval,
        rows,
        orbits,
    })
}

fn sweep_row(
    f: &NonlinearitySpec,
    eps: f64,
    interval: (f64, f64),
    levels: Levels,
    opts: PeriodicOptions,
) -> Result<(LimitSweepRow, PeriodicOrbit)> {
    let g = make_default_grid(eps)?;
    let b0 = InitialData::constant(g, 1.0)?;
    let (orbit, converged) = match find_periodic(&b0, f, opts)? {
        PeriodicSearch::Periodic(o) => (*o, true),
        PeriodicSearch::NotConverged {
            iterations,
            distance_history,
            last,
        } => (
            orbit_from_segment(last, f, iterations, distance_history)?,
            false,
        ),
        PeriodicSearch::Equilibrium { .. } => {
            return Err(Error::Divergence {
                horizon: f64::INFINITY,
            });
        }
    };
    let aligned = align_phase(&orbit, levels)?;
    let gr = aligned.trajectory.grid;
    let sup_error = (gr.node_floor(interval.0)..=gr.node_floor(interval.1))
        .filter(|&n| gr.time(n) >= interval.0)
        .map(|n| (aligned.trajectory.node_value(n) - square_wave_levels(levels, gr.time(n))).abs())
        .fold(0.0, f64::max);
    let row = LimitSweepRow {
        eps: g.eps,
        period: orbit.period,
        sup_error,
        l1_error: aligned.l1_error,
        overshoot: orbit.extremes.1 - levels.hi,
        undershoot: orbit.extremes.0 - levels.lo,
        converged,
        iterations: orbit.iterations,
    };
    Ok((row, orbit))
}

/// Non-increasing up to at most one upward step of relative size `<= slack`.
pub fn monotone_with_tolerance(values: &[f64], slack: f64) -> bool {
    let mut inversions = 0;
    for w in values.windows(2) {
        if w[1] > w[0] {
            inversions += 1;
            if inversions > 1 || w[1] > w[0] * (1.0 + slack) {
                return false;
            }
        }
    }
    true
}

impl Sweep {
    fn converged(&self, pick: impl Fn(&LimitSweepRow) -> f64) -> Vec<f64> {
        self.rows.iter().filter(|r| r.converged).map(pick).collect()
    }

    pub fn sup_error_monotone(&self) -> bool {
        monotone_with_tolerance(&self.converged(|r| r.sup_error), 0.05)
    }

    pub fn l1_error_monotone(&self) -> bool {
        monotone_with_tolerance(&self.converged(|r| r.l1_error), 0.05)
    }

    /// CSV `eps,period,sup_error,l1_error,overshoot,undershoot`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "eps,period,sup_error,l1_error,overshoot,undershoot")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.eps, r.period, r.sup_error, r.l1_error, r.overshoot, r.undershoot
            )?;
        }
        Ok(())
    }
}
