//! Time grids commensurate with the window width.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid with `dt = 1/K` and `eps = 2m/K`, so that `0`, `1`, `eps/2`
/// and `1 +- eps/2` are all nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub eps: f64,
    pub m: usize,
    pub steps_per_unit: usize,
    pub eps_requested: f64,
}

impl Grid {
    #[inline]
    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    pub fn snap_distance(&self) -> f64 {
        (self.eps - self.eps_requested).abs()
    }

    /// Intervals spanned by the initial segment `[-1 - eps/2, 0]`.
    #[inline]
    pub fn history_intervals(&self) -> usize {
        self.steps_per_unit + self.m
    }

    #[inline]
    pub fn time(&self, node: i64) -> f64 {
        node as f64 / self.steps_per_unit as f64
    }

    /// Node index of `t`, which must lie on the grid up to round-off.
    pub fn node_of(&self, t: f64) -> Result<i64> {
        let x = t * self.steps_per_unit as f64;
        let n = x.round();
        if (x - n).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "t = {t} is not a grid node (dt = {})",
                self.dt()
            )));
        }
        Ok(n as i64)
    }

    /// Largest node index whose time does not exceed `t`.
    pub fn node_floor(&self, t: f64) -> i64 {
        let x = t * self.steps_per_unit as f64;
        let n = x.round();
        if (x - n).abs() <= 1e-9 {
            n as i64
        } else {
            x.floor() as i64
        }
    }
}

/// Snaps `eps_requested` to the nearest `2m/K` with integer `K`.
pub fn make_grid(eps_requested: f64, m: usize) -> Result<Grid> {
    if !(eps_requested > 0.0 && eps_requested < 1.0) {
        return Err(Error::Config(format!(
            "eps = {eps_requested} must lie in (0, 1)"
        )));
    }
    if m == 0 {
        return Err(Error::Config("m must be positive".into()));
    }
    let k = (2.0 * m as f64 / eps_requested).round();
    if k < (2 * m + 1) as f64 {
        return Err(Error::Config(format!(
            "eps = {eps_requested} with m = {m} snaps to K = {k}, which would force eps >= 1"
        )));
    }
    let k = k as usize;
    Ok(Grid {
        eps: (2 * m) as f64 / k as f64,
        m,
        steps_per_unit: k,
        eps_requested,
    })
}

/// Default half-window subinterval count: at least 10 for `eps >= 0.1`,
/// otherwise enough for `dt <= 1/400`, bumped to the first value that makes
/// `2m/eps` an integer when one exists nearby.
pub fn default_m(eps: f64) -> usize {
    let base = if eps >= 0.1 {
        10
    } else {
        (200.0 * eps - 1e-9).ceil().max(1.0) as usize
    };
    (base..base * 4 + 8)
        .find(|&m| {
            let k = 2.0 * m as f64 / eps;
            (k - k.round()).abs() < 1e-9 * k
        })
        .unwrap_or(base)
}

pub fn make_default_grid(eps_requested: f64) -> Result<Grid> {
    if !(eps_requested > 0.0 && eps_requested < 1.0) {
        return Err(Error::Config(format!(
            "eps = {eps_requested} must lie in (0, 1)"
        )));
    }
    make_grid(eps_requested, default_m(eps_requested))
}
