//! Initial data, continuations by the method of steps, and window quadrature.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::nonlinearity::NonlinearitySpec;
use crate::quadrature::composite_weights;

/// Which one-sided limit to take at the junction `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Samples of `b` on the nodes of `[-1 - eps/2, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub grid: Grid,
    pub samples: Vec<f64>,
}

impl InitialData {
    pub fn from_samples(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        let want = grid.history_intervals() + 1;
        if samples.len() != want {
            return Err(Error::Domain(format!(
                "initial data needs {want} samples on [-1-eps/2, 0], got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: grid.time(i as i64 - grid.history_intervals() as i64),
                value: samples[i],
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: Grid, b: impl Fn(f64) -> f64) -> Result<Self> {
        let n0 = grid.history_intervals() as i64;
        let samples = (0..=n0).map(|i| b(grid.time(i - n0))).collect();
        Self::from_samples(grid, samples)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Self::from_fn(grid, |_| c)
    }

    pub fn t0(&self) -> f64 {
        -1.0 - self.grid.eps / 2.0
    }

    /// Time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.grid
            .time(i as i64 - self.grid.history_intervals() as i64)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(|i| self.time(i))
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Piecewise-linear evaluation on `[-1 - eps/2, 0]`.
    pub fn value_at(&self, t: f64) -> f64 {
        let n0 = self.grid.history_intervals();
        let x = (t * self.grid.steps_per_unit as f64) + n0 as f64;
        interpolate(&self.samples, x)
    }

    pub fn to_trajectory(&self) -> Trajectory {
        Trajectory {
            grid: self.grid,
            start: -(self.grid.history_intervals() as i64),
            samples: self.samples.clone(),
            jump_at_zero: None,
        }
    }
}

/// Linear interpolation of `v` at fractional index `x`, clamped to the ends.
pub(crate) fn interpolate(v: &[f64], x: f64) -> f64 {
    let last = v.len() - 1;
    if x <= 0.0 {
        return v[0];
    }
    if x >= last as f64 {
        return v[last];
    }
    let i = x.floor() as usize;
    let s = x - i as f64;
    if s == 0.0 {
        v[i]
    } else {
        v[i] + s * (v[i + 1] - v[i])
    }
}

/// Node samples of a continuation. With a recorded jump, the sample at node
/// 0 is the right limit `x_b(0)` and the left limit `b(0)` lives in
/// `jump_at_zero.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Grid,
    /// Node index of the first sample.
    pub start: i64,
    pub samples: Vec<f64>,
    pub jump_at_zero: Option<(f64, f64)>,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.grid.time(self.start)
    }

    pub fn end_node(&self) -> i64 {
        self.start + self.samples.len() as i64 - 1
    }

    pub fn t_end(&self) -> f64 {
        self.grid.time(self.end_node())
    }

    pub fn time(&self, i: usize) -> f64 {
        self.grid.time(self.start + i as i64)
    }

    pub fn covers(&self, lo: i64, hi: i64) -> bool {
        lo >= self.start && hi <= self.end_node()
    }

    /// Right-continuous node value.
    pub fn node_value(&self, n: i64) -> f64 {
        self.samples[(n - self.start) as usize]
    }

    pub fn node_value_side(&self, n: i64, side: Side) -> f64 {
        match (n, side, self.jump_at_zero) {
            (0, Side::Left, Some((left, _))) => left,
            _ => self.node_value(n),
        }
    }

    /// Piecewise-linear value at `t`, continuous on each side of the
    /// junction; `side` picks the limit at `t = 0`.
    pub fn value_at(&self, t: f64, side: Side) -> f64 {
        let k = self.grid.steps_per_unit as f64;
        let x = t * k - self.start as f64;
        let last = (self.samples.len() - 1) as f64;
        let x = x.clamp(0.0, last);
        let i = x.floor() as i64;
        let s = x - i as f64;
        let n = self.start + i;
        if s < 1e-9 {
            return self.node_value_side(n, side);
        }
        if 1.0 - s < 1e-9 {
            return self.node_value_side(n + 1, side);
        }
        // interior of [n, n+1]: left end uses its right limit, right end its left limit
        let a = self.node_value_side(n, Side::Right);
        let b = self.node_value_side(n + 1, Side::Left);
        a + s * (b - a)
    }

    pub fn sup_norm(&self) -> f64 {
        let base = self.samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        match self.jump_at_zero {
            Some((l, _)) => base.max(l.abs()),
            None => base,
        }
    }

    /// Samples on the closed node range `[from, to]`; a jump is kept only if
    /// node 0 is strictly inside.
    pub fn slice(&self, from: i64, to: i64) -> Result<Trajectory> {
        if !self.covers(from, to) || from > to {
            return Err(Error::Domain(format!(
                "slice [{}, {}] outside [{}, {}]",
                self.grid.time(from),
                self.grid.time(to),
                self.t0(),
                self.t_end()
            )));
        }
        let a = (from - self.start) as usize;
        let b = (to - self.start) as usize;
        let jump = self.jump_at_zero.filter(|_| from < 0 && 0 < to);
        let mut samples = self.samples[a..=b].to_vec();
        if from == 0 {
            samples[0] = self.node_value_side(0, Side::Right);
        }
        if to == 0 {
            *samples.last_mut().unwrap() = self.node_value_side(0, Side::Left);
        }
        Ok(Trajectory {
            grid: self.grid,
            start: from,
            samples,
            jump_at_zero: jump,
        })
    }

    /// Largest change between neighbouring samples on `[0, t_end]`.
    pub fn max_step_change(&self) -> f64 {
        let first = (0 - self.start).max(0) as usize;
        self.samples[first..]
            .windows(2)
            .fold(0.0, |a, w| a.max((w[1] - w[0]).abs()))
    }

    /// CSV with header `t,x`, 17 significant digits; a jump at 0 is written
    /// as two rows with equal `t`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x")?;
        for (i, v) in self.samples.iter().enumerate() {
            let n = self.start + i as i64;
            let t = self.grid.time(n);
            if n == 0 {
                if let Some((left, _)) = self.jump_at_zero {
                    writeln!(w, "{t:.16e},{left:.16e}")?;
                }
            }
            writeln!(w, "{t:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Window quadrature over `2m` intervals with the jump-aware split.
pub(crate) struct Window {
    full: Vec<f64>,
    pieces: Vec<Vec<f64>>,
    two_m: usize,
}

impl Window {
    pub(crate) fn new(grid: &Grid) -> Self {
        let two_m = 2 * grid.m;
        Self {
            full: composite_weights(two_m),
            pieces: (0..=two_m).map(composite_weights).collect(),
            two_m,
        }
    }

    /// `(1/eps) * integral` from the `2m + 1` integrand values `fv`. `zero`
    /// carries the local index of node 0 and the integrand's left and right
    /// limits there, when the data jump.
    pub(crate) fn eval(&self, fv: &[f64], zero: Option<(usize, f64, f64)>) -> f64 {
        debug_assert_eq!(fv.len(), self.two_m + 1);
        let dot = |w: &[f64], v: &[f64]| w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let sum = match zero {
            Some((z, fl, _)) if z == self.two_m => {
                dot(&self.full[..self.two_m], &fv[..self.two_m]) + self.full[self.two_m] * fl
            }
            Some((0, _, fr)) => self.full[0] * fr + dot(&self.full[1..], &fv[1..]),
            Some((z, fl, fr)) => {
                let left = &self.pieces[z];
                let right = &self.pieces[self.two_m - z];
                dot(&left[..z], &fv[..z])
                    + left[z] * fl
                    + right[0] * fr
                    + dot(&right[1..], &fv[z + 1..])
            }
            None => dot(&self.full, fv),
        };
        sum / self.two_m as f64
    }
}

/// `(1/eps) * integral of f(x(s))` over `[t - 1 - eps/2, t - 1 + eps/2]`,
/// with the integrand taken at stored nodes only.
pub fn window_integral(traj: &Trajectory, f: &NonlinearitySpec, t: f64) -> Result<f64> {
    let g = traj.grid;
    let n = g.node_of(t)?;
    let (k, m) = (g.steps_per_unit as i64, g.m as i64);
    let (lo, hi) = (n - k - m, n - k + m);
    if !traj.covers(lo, hi) {
        return Err(Error::Domain(format!(
            "window of t = {t} is not covered by the trajectory"
        )));
    }
    let fv: Vec<f64> = (lo..=hi).map(|j| f.eval(traj.node_value(j))).collect();
    let zero = match traj.jump_at_zero {
        Some((left, right)) if lo <= 0 && 0 <= hi => {
            Some(((0 - lo) as usize, f.eval(left), f.eval(right)))
        }
        _ => None,
    };
    Ok(Window::new(&g).eval(&fv, zero))
}

/// Continuation of `b` up to `horizon`, which must be a grid node.
pub fn extend(b: &InitialData, f: &NonlinearitySpec, horizon: f64) -> Result<Trajectory> {
    if !(horizon >= 0.0) {
        return Err(Error::Domain(format!(
            "horizon {horizon} must be non-negative"
        )));
    }
    let end = b.grid.node_of(horizon)?;
    extend_to_node(b, f, end)
}

/// Continuation of `b` through node `end`.
pub fn extend_to_node(b: &InitialData, f: &NonlinearitySpec, end: i64) -> Result<Trajectory> {
    let g = b.grid;
    let n0 = g.history_intervals();
    let two_m = 2 * g.m;
    let end = end.max(0) as usize;
    let mut vals = Vec::with_capacity(n0 + 1 + end);
    vals.extend_from_slice(&b.samples);
    let mut fv: Vec<f64> = Vec::with_capacity(vals.capacity());
    for (i, &v) in vals.iter().enumerate() {
        let y = f.eval(v);
        if !y.is_finite() {
            return Err(Error::NonFinite {
                t: g.time(i as i64 - n0 as i64),
                value: y,
            });
        }
        fv.push(y);
    }
    let left0 = vals[n0];
    let f_left0 = fv[n0];
    let window = Window::new(&g);
    for n in 0..=end {
        let zero = (n <= n0 && n0 - n <= two_m).then(|| (n0 - n, f_left0, fv[n0]));
        let x = window.eval(&fv[n..=n + two_m], zero);
        let fx = f.eval(x);
        if !x.is_finite() || !fx.is_finite() {
            return Err(Error::NonFinite {
                t: g.time(n as i64),
                value: if x.is_finite() { fx } else { x },
            });
        }
        if n == 0 {
            vals[n0] = x;
            fv[n0] = fx;
        } else {
            vals.push(x);
            fv.push(fx);
        }
    }
    let right0 = vals[n0];
    Ok(Trajectory {
        grid: g,
        start: -(n0 as i64),
        samples: vals,
        jump_at_zero: Some((left0, right0)),
    })
}

/// Both one-sided values of `x'(t) = (f(x(t-1+eps/2)) - f(x(t-1-eps/2)))/eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneSided {
    pub left: f64,
    pub right: f64,
}

impl OneSided {
    pub fn is_smooth(&self, tol: f64) -> bool {
        (self.left - self.right).abs() <= tol
    }
}

pub fn derivative(traj: &Trajectory, f: &NonlinearitySpec, t: f64) -> Result<OneSided> {
    let g = traj.grid;
    let (a, b) = (t - 1.0 + g.eps / 2.0, t - 1.0 - g.eps / 2.0);
    if b < traj.t0() - 1e-12 || a > traj.t_end() + 1e-12 {
        return Err(Error::Domain(format!(
            "derivative at t = {t} needs history not in the trajectory"
        )));
    }
    let one = |side| (f.eval(traj.value_at(a, side)) - f.eval(traj.value_at(b, side))) / g.eps;
    Ok(OneSided {
        left: one(Side::Left),
        right: one(Side::Right),
    })
}

/// Slack used by the uniform bound check.
pub const BOUND_SLACK: f64 = 1e-9;

/// `|x| <= R + slack` at every stored sample, including the left limit at 0.
pub fn sup_bound_check(traj: &Trajectory, r: f64) -> bool {
    traj.sup_norm() <= r + BOUND_SLACK
}
