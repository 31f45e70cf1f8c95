//! Bracketing root finders shared by the nonlinearity and barrier modules.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]`; the endpoint values must not share a strict sign.
///
/// Stops when the bracket is narrower than `tol` or cannot be split further
/// in binary64.
pub fn bisect<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut ga = g(a);
    let gb = g(b);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if !(ga.is_finite() && gb.is_finite()) || ga.signum() == gb.signum() {
        return Err(Error::NoRoot(format!(
            "no sign change on [{a}, {b}] (values {ga:e}, {gb:e})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        if b - a <= tol || mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// All roots of `g` on `[a, b]` located by a uniform sign-change scan with
/// spacing `step`, each refined by bisection to machine precision.
///
/// Sampled exact zeros are reported as roots and never double counted with
/// an adjacent bracket.
pub fn scan_roots<F: Fn(f64) -> f64>(g: F, a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step).ceil().max(1.0) as usize;
    let x_at = |i: usize| {
        if i == n {
            b
        } else {
            a + (b - a) * (i as f64) / (n as f64)
        }
    };
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n {
        let x = x_at(i);
        let gx = g(x);
        if gx == 0.0 {
            roots.push(x);
        } else if let Some((px, pg)) = prev {
            if pg != 0.0 && pg.signum() != gx.signum() {
                if let Ok(r) = bisect(&g, px, x, 0.0) {
                    roots.push(r);
                }
            }
        }
        prev = Some((x, gx));
    }
    roots
}
