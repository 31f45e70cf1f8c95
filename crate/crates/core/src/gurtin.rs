//! Age-structured (Gurtin-MacCamy) population model with a delayed uniform
//! kernel, reduced to the window equation around the positive equilibrium.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barriers::eps0;
use crate::error::{Error, Result};
use crate::grid::{make_default_grid, Grid};
use crate::nonlinearity::{Kind, NonlinearitySpec};
use crate::oscillation::{find_periodic, PeriodicOptions, PeriodicOrbit, PeriodicSearch};
use crate::quadrature::integrate_uniform;
use crate::roots::bisect;
use crate::trajectory::{extend, interpolate, window_integral, InitialData, Side, Trajectory};

/// Root of `f(x) = x` in `bracket`, certified to `|f(k) - k| <= 1e-12`.
pub fn kappa_fixed_point(f: &NonlinearitySpec, bracket: (f64, f64)) -> Result<f64> {
    let g = |x: f64| f.eval(x) - x;
    let k = bisect(g, bracket.0, bracket.1, 1e-15)?;
    let res = g(k).abs();
    if res > 1e-12 * k.abs().max(1.0) {
        return Err(Error::Estimation {
            reason: format!("fixed point {k} not certified"),
            residual: res,
        });
    }
    Ok(k)
}

/// Maximiser of a unimodal `f` on `[0, hi]`, by golden-section search.
pub fn argmax(f: &NonlinearitySpec, hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f.eval(c) >= f.eval(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// The value below `kappa` where `f` first reaches `kappa`.
pub fn x_star(f: &NonlinearitySpec, kappa: f64) -> Result<f64> {
    let peak = argmax(f, kappa);
    bisect(|x| f.eval(x) - kappa, 0.0, peak, 1e-15)
}

/// Shifted nonlinearity `F(t) = f(t + kappa) - kappa`, frozen below
/// `x_clamp - kappa` at its value there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shifted {
    pub spec: NonlinearitySpec,
    pub fprime_kappa: f64,
    pub warning: Option<String>,
}

pub fn shift_clamp(f: &NonlinearitySpec, kappa: f64, x_clamp: f64) -> Result<Shifted> {
    let spec = NonlinearitySpec::new(Kind::ShiftedClamp {
        base: Box::new(f.kind.clone()),
        kappa,
        x_clamp,
    })?;
    let fprime_kappa = f.derivative(kappa)?;
    let warning = (fprime_kappa >= -1.0).then(|| {
        format!("f'(kappa) = {fprime_kappa} >= -1: feedback too weak for sustained oscillation")
    });
    Ok(Shifted {
        spec,
        fprime_kappa,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GurtinConfig {
    pub f: NonlinearitySpec,
    pub mu: f64,
    pub eps: f64,
    pub kappa: f64,
    pub x_star: f64,
    pub x_clamp: f64,
    /// `f(sup f)`, the lower end of the attracting range of birth rates.
    pub f_of_sup: f64,
    /// Whether `f(sup f) > x_star`. When false `x_clamp` falls back to
    /// `f(sup f) / 2`, below every birth rate of an omega-limit solution,
    /// and `F` keeps the negative-feedback sign only above `x_star - kappa`.
    pub range_condition: bool,
}

impl GurtinConfig {
    pub fn new(f: NonlinearitySpec, mu: f64, eps: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Config(format!(
                "mortality {mu} must be non-negative"
            )));
        }
        let lo = 1e-9;
        if !(f.eval(lo) > lo) {
            return Err(Error::Config("f must exceed the identity near 0".into()));
        }
        let mut hi = 1.0;
        while f.eval(hi) >= hi {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::NoRoot("no positive fixed point below 1e6".into()));
            }
        }
        let kappa = kappa_fixed_point(&f, (lo, hi))?;
        let xs = x_star(&f, kappa)?;
        let peak = argmax(&f, kappa);
        let f_of_sup = f.eval(f.eval(peak));
        let range_condition = f_of_sup > xs;
        let x_clamp = if range_condition {
            0.5 * (xs + f_of_sup)
        } else {
            0.5 * f_of_sup
        };
        Ok(Self {
            f,
            mu,
            eps,
            kappa,
            x_star: xs,
            x_clamp,
            f_of_sup,
            range_condition,
        })
    }

    pub fn with_x_clamp(mut self, x_clamp: f64) -> Result<Self> {
        if !(x_clamp > 0.0 && x_clamp < self.kappa) {
            return Err(Error::Config(format!(
                "x_clamp {x_clamp} must lie in (0, {})",
                self.kappa
            )));
        }
        self.x_clamp = x_clamp;
        Ok(self)
    }

    pub fn shifted(&self) -> Result<Shifted> {
        shift_clamp(&self.f, self.kappa, self.x_clamp)
    }
}

/// Uniform delayed kernel: `gamma(a) = exp(mu a) / eps` on
/// `[1 - eps/2, 1 + eps/2]`, zero elsewhere.
pub fn kernel(mu: f64, eps: f64, a: f64) -> f64 {
    if (a - 1.0).abs() <= eps / 2.0 + 1e-12 {
        (mu * a).exp() / eps
    } else {
        0.0
    }
}

/// `integral of gamma(a) exp(-mu a)` over `support`, Simpson with `n` intervals.
pub fn normalization(gamma: impl Fn(f64) -> f64, mu: f64, support: (f64, f64), n: usize) -> f64 {
    let h = (support.1 - support.0) / n as f64;
    let v: Vec<f64> = (0..=n)
        .map(|i| {
            let a = support.0 + i as f64 * h;
            gamma(a) * (-mu * a).exp()
        })
        .collect();
    integrate_uniform(&v, h)
}

/// Normalization of the uniform kernel on the window nodes of the default grid.
pub fn kernel_check(mu: f64, eps: f64) -> Result<f64> {
    let g = make_default_grid(eps)?;
    let support = (1.0 - g.eps / 2.0, 1.0 + g.eps / 2.0);
    Ok(normalization(
        |a| kernel(mu, g.eps, a),
        mu,
        support,
        2 * g.m,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySnapshot {
    pub t: f64,
    pub ages: Vec<f64>,
    pub u: Vec<f64>,
}

impl DensitySnapshot {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "a,u")?;
        for (a, u) in self.ages.iter().zip(&self.u) {
            writeln!(w, "{a:.16e},{u:.16e}")?;
        }
        Ok(())
    }
}

/// `u(t, a)` along characteristics on the ages `j * da`, `j = 0..=J`, with
/// `u0` given on the same ages and `b` the birth rate.
pub fn reconstruct_density(
    b: &Trajectory,
    u0: &[f64],
    da: f64,
    mu: f64,
    t: f64,
) -> Result<DensitySnapshot> {
    if u0.len() < 2 || !(da > 0.0) {
        return Err(Error::Domain(
            "age profile needs at least two samples and positive spacing".into(),
        ));
    }
    let age_max = da * (u0.len() - 1) as f64;
    let lowest = (t - age_max).max(0.0);
    if t < 0.0 || t > b.t_end() + 1e-12 || lowest < b.t0() - 1e-12 {
        return Err(Error::Domain(format!(
            "birth rate on [{}, {}] does not cover [{lowest}, {t}]",
            b.t0(),
            b.t_end()
        )));
    }
    let ages: Vec<f64> = (0..u0.len()).map(|j| j as f64 * da).collect();
    let lag = t / da;
    let on_grid = (lag - lag.round()).abs() < 1e-9;
    let u = ages
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            if a >= t {
                let back = if on_grid {
                    u0[j - lag.round() as usize]
                } else {
                    interpolate(u0, (a - t) / da)
                };
                (-mu * t).exp() * back
            } else {
                (-mu * a).exp() * b.value_at(t - a, Side::Right)
            }
        })
        .collect();
    Ok(DensitySnapshot { t, ages, u })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoOptions {
    pub horizon: f64,
    pub age_max: f64,
    pub periodic: PeriodicOptions,
}

impl Default for DemoOptions {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            age_max: 3.0,
            periodic: PeriodicOptions {
                relaxation: 0.3,
                ..PeriodicOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GurtinDemo {
    pub grid: Grid,
    pub fprime_kappa: f64,
    pub eps0: f64,
    /// Periodic orbit of the shifted variable `zeta = B - kappa`.
    pub orbit: PeriodicOrbit,
    /// `B = zeta + kappa` continued from the periodic segment.
    pub big_b: Trajectory,
    /// Birth rate `b = f(B)` on the same nodes.
    pub birth: Trajectory,
    /// Largest nodewise defect of `B(t) = (1/eps) * integral of f(B(t - a))`.
    pub b_residual: f64,
    pub min_birth: f64,
    /// The orbit never reaches the frozen part of the shifted nonlinearity.
    pub clamp_inactive: bool,
    pub snapshots: Vec<DensitySnapshot>,
}

/// Periodic birth rate of the reduced model and density snapshots at
/// `times`, starting from the stationary age profile `kappa exp(-mu a)`.
pub fn asymptotic_demo(cfg: &GurtinConfig, times: &[f64], opts: DemoOptions) -> Result<GurtinDemo> {
    let shifted = cfg.shifted()?;
    let fp = shifted.fprime_kappa;
    if fp >= -2.0 {
        return Err(Error::Infeasible(format!(
            "f'(kappa) = {fp} >= -2, no periodic orbit is claimed"
        )));
    }
    let e0 = eps0(fp)?;
    let grid = make_default_grid(cfg.eps)?;
    if grid.eps > e0 {
        return Err(Error::Infeasible(format!(
            "eps = {} exceeds eps0(f'(kappa)) = {e0}",
            grid.eps
        )));
    }
    let big_f = &shifted.spec;
    let start = InitialData::constant(grid, 1.0)?;
    let orbit = match find_periodic(&start, big_f, opts.periodic)? {
        PeriodicSearch::Periodic(o) => *o,
        other => {
            return Err(Error::Estimation {
                reason: format!(
                    "shifted equation has no periodic orbit: {}",
                    outcome(&other)
                ),
                residual: f64::NAN,
            })
        }
    };
    let zeta = extend(&orbit.segment, big_f, opts.horizon)?;
    let floor = cfg.x_clamp - cfg.kappa;
    let clamp_inactive = zeta.samples.iter().all(|&z| z > floor)
        && zeta
            .jump_at_zero
            .is_none_or(|(l, r)| l > floor && r > floor);
    let shift = |v: f64| v + cfg.kappa;
    let big_b = Trajectory {
        grid,
        start: zeta.start,
        samples: zeta.samples.iter().map(|&v| shift(v)).collect(),
        jump_at_zero: zeta.jump_at_zero.map(|(l, r)| (shift(l), shift(r))),
    };
    let birth = Trajectory {
        samples: big_b.samples.iter().map(|&v| cfg.f.eval(v)).collect(),
        jump_at_zero: big_b
            .jump_at_zero
            .map(|(l, r)| (cfg.f.eval(l), cfg.f.eval(r))),
        ..big_b.clone()
    };
    let mut b_residual: f64 = 0.0;
    for n in 0..=big_b.end_node() {
        let w = window_integral(&big_b, &cfg.f, grid.time(n))?;
        b_residual = b_residual.max((w - big_b.node_value(n)).abs());
    }
    let min_birth = birth.samples.iter().copied().fold(f64::INFINITY, f64::min);

    let da = grid.dt();
    let n_age = (opts.age_max / da).round() as usize;
    let u0: Vec<f64> = (0..=n_age)
        .map(|j| cfg.kappa * (-cfg.mu * j as f64 * da).exp())
        .collect();
    let snapshots = times
        .par_iter()
        .map(|&t| reconstruct_density(&birth, &u0, da, cfg.mu, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(GurtinDemo {
        grid,
        fprime_kappa: fp,
        eps0: e0,
        orbit,
        big_b,
        birth,
        b_residual,
        min_birth,
        clamp_inactive,
        snapshots,
    })
}

fn outcome(s: &PeriodicSearch) -> &'static str {
    match s {
        PeriodicSearch::Periodic(_) => "periodic",
        PeriodicSearch::Equilibrium { .. } => "collapse onto the equilibrium",
        PeriodicSearch::NotConverged { .. } => "no convergence",
    }
}
