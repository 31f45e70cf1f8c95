//! Linear eigenpair, the threshold window width, eigenfunction barriers,
//! membership in the invariant set, the straightening maps and a certified
//! generator of initial data.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid};
use crate::nonlinearity::{analysis_constants, NonlinearitySpec};
use crate::oscillation::{first_return, zeros_of_data};
use crate::roots::bisect;
use crate::trajectory::{interpolate, window_integral, InitialData, Trajectory};

/// `sin(pi (t + 1 + tau))`
pub fn phi0(tau: f64, t: f64) -> f64 {
    (PI * (t + 1.0 + tau)).sin()
}

/// `sin(x) / x` with the removable point filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Eigenvalue of the linearised window operator on `phi0`.
pub fn lambda0(fprime0: f64, eps: f64) -> f64 {
    -fprime0 * (2.0 / (PI * eps)) * (PI * eps / 2.0).sin()
}

/// Smallest `eps > 0` with `sinc(pi eps / 2) = -2 / f'(0)`.
pub fn eps0(fprime0: f64) -> Result<f64> {
    if !(fprime0 < -2.0) {
        return Err(Error::Infeasible(format!(
            "f'(0) = {fprime0} >= -2: sinc never reaches {} on (0, 2)",
            -2.0 / fprime0
        )));
    }
    let target = -2.0 / fprime0;
    let x = bisect(|x| sinc(x) - target, 0.0, PI, 0.0)?;
    Ok(2.0 * x / PI)
}

/// Sup-norm defect of the discrete window operator with slope `fprime0`
/// applied to `phi0^tau` over one period, against `lambda0 * phi0^tau`.
pub fn eigencheck_shifted(eps: f64, fprime0: f64, m: usize, tau: f64) -> Result<f64> {
    let g = make_grid(eps, m)?;
    let k = g.steps_per_unit as i64;
    let start = -(g.history_intervals() as i64);
    let end = 2 * k;
    let traj = Trajectory {
        grid: g,
        start,
        samples: (start..=end).map(|n| phi0(tau, g.time(n))).collect(),
        jump_at_zero: None,
    };
    let f = NonlinearitySpec::linear(fprime0);
    let lam = lambda0(fprime0, g.eps);
    let mut worst: f64 = 0.0;
    for n in 0..k * 2 {
        let t = g.time(n);
        if g.time(n - k - g.m as i64) < traj.t0() {
            continue;
        }
        let got = window_integral(&traj, &f, t)?;
        worst = worst.max((got - lam * phi0(tau, t)).abs());
    }
    Ok(worst)
}

pub fn eigencheck(eps: f64, fprime0: f64, m: usize) -> Result<f64> {
    eigencheck_shifted(eps, fprime0, m, -1.0)
}

/// `0` below `a`, `1` above `b`, `3s^2 - 2s^3` between.
pub fn smoothstep(a: f64, b: f64, t: f64) -> f64 {
    if t <= a {
        0.0
    } else if t >= b {
        1.0
    } else {
        let s = (t - a) / (b - a);
        s * s * (3.0 - 2.0 * s)
    }
}

/// Intersection of `phi0^{eps/2}` and `phi0^tau` inside the positive lobe.
pub fn tau_star(eps: f64, tau: f64) -> f64 {
    -0.5 - (eps / 4.0 + tau / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierContext {
    pub grid: Grid,
    pub eps: f64,
    pub fprime0: f64,
    pub lambda0: f64,
    pub delta0: f64,
    pub alpha0: f64,
    pub a0: f64,
    pub big_a0: f64,
    pub r: f64,
    pub alpha: f64,
    pub tau0: f64,
}

impl BarrierContext {
    /// Context with a chosen amplitude, for data checked against a given
    /// `alpha` outside the budget.
    pub fn manual(grid: Grid, alpha: f64, r: f64, tau0: f64) -> Result<Self> {
        if !(alpha > 0.0 && r > 0.0 && tau0 >= 0.0) {
            return Err(Error::Config(
                "alpha and R must be positive, tau0 non-negative".into(),
            ));
        }
        Ok(Self {
            grid,
            eps: grid.eps,
            fprime0: f64::NAN,
            lambda0: f64::NAN,
            delta0: f64::NAN,
            alpha0: f64::NAN,
            a0: f64::NAN,
            big_a0: f64::NAN,
            r,
            alpha,
            tau0,
        })
    }

    /// `1e-9 alpha + 2 dt (2R / eps)`
    pub fn membership_tolerance(&self) -> f64 {
        1e-9 * self.alpha + 2.0 * self.grid.dt() * (2.0 * self.r / self.eps)
    }

    /// `lambda0 (1 + delta0 / f'(0))`
    pub fn contraction_factor(&self) -> f64 {
        self.lambda0 * (1.0 + self.delta0 / self.fprime0)
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau <= self.eps * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "tau = {tau} outside (0, eps = {}]",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Budget of small constants: `delta0`, `alpha0`, `alpha` and `tau0`, each
/// taken at half its limiting value.
pub fn budget(f: &NonlinearitySpec, grid: &Grid, r_floor: f64) -> Result<BarrierContext> {
    let fp = f.derivative_at_zero()?;
    let eps = grid.eps;
    if !(fp < -2.0) {
        return Err(Error::Infeasible(format!(
            "lambda0 (1 + delta0/f'(0)) >= 2 fails: f'(0) = {fp} >= -2 gives lambda0 < 2 for every eps > 0"
        )));
    }
    let e0 = eps0(fp)?;
    if eps > e0 {
        return Err(Error::Infeasible(format!(
            "lambda0 (1 + delta0/f'(0)) >= 2 fails: eps = {eps} exceeds eps0 = {e0}"
        )));
    }
    let lam = lambda0(fp, eps);
    let delta0 = -fp * (1.0 - 2.0 / lam) / 2.0;
    if !(delta0 > 0.0) {
        return Err(Error::Infeasible(format!(
            "no delta0 > 0 with lambda0 (1 + delta0/f'(0)) >= 2 at eps = {eps}"
        )));
    }
    let consts = analysis_constants(f, r_floor)?;
    let alpha0 = slope_radius(f, fp + delta0);
    if !(alpha0 > 0.0) {
        return Err(Error::Infeasible(
            "f(x)/x <= f'(0) + delta0 fails arbitrarily close to 0".into(),
        ));
    }
    let alpha = alpha0.min(consts.a0) / lam / 2.0;
    let tau0 =
        alpha * eps * lam * (PI * eps / 2.0).sin() * (1.0 + delta0 / fp) / (2.0 * consts.r) / 2.0;
    Ok(BarrierContext {
        grid: *grid,
        eps,
        fprime0: fp,
        lambda0: lam,
        delta0,
        alpha0,
        a0: consts.a0,
        big_a0: consts.big_a0,
        r: consts.r,
        alpha,
        tau0,
    })
}

/// Largest sampled radius with `f(x)/x <= bound` for all sampled `0 < |x| <= radius`.
fn slope_radius(f: &NonlinearitySpec, bound: f64) -> f64 {
    let (lo, hi) = f.eval_domain;
    let l = (-lo).min(hi);
    let n = 100_000;
    let mut radius = 0.0;
    for k in 1..=n {
        let x = l * k as f64 / n as f64;
        if f.eval(x) / x > bound || f.eval(-x) / -x > bound {
            break;
        }
        radius = x;
    }
    radius
}

/// Lower barrier `gamma_tau` on `[-1 - eps/2, -tau]`.
pub fn gamma_tau(ctx: &BarrierContext, tau: f64, t: f64) -> Result<f64> {
    ctx.check_tau(tau)?;
    let eps = ctx.eps;
    let slack = 1e-12;
    if t < -1.0 - eps / 2.0 - slack || t > -tau + slack {
        return Err(Error::Domain(format!(
            "gamma_tau({tau}) evaluated at t = {t} outside [-1-eps/2, -tau]"
        )));
    }
    Ok(gamma_unchecked(ctx.alpha, eps, tau, t))
}

fn gamma_unchecked(alpha: f64, eps: f64, tau: f64, t: f64) -> f64 {
    let half = eps / 2.0;
    if tau <= half {
        let hat = (-0.5 - t).clamp(tau, half);
        return alpha * phi0(hat, t);
    }
    let ts = tau_star(eps, tau);
    let (p_half, p_tau) = (phi0(half, t), phi0(tau, t));
    let blend = if t < ts - half {
        smoothstep(ts - eps, ts - half, t)
    } else if t <= ts + half {
        return alpha * p_half.max(p_tau);
    } else {
        smoothstep(ts + half, ts + eps, t)
    };
    alpha * ((1.0 - blend) * p_half + blend * p_tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    /// Inside the barrier set for the context's `alpha`.
    pub member: bool,
    /// Additionally `tau >= tau0` and `|b| <= R`.
    pub member_r: bool,
    pub tau: f64,
    pub worst_lower_violation: f64,
    pub worst_upper_violation: f64,
    pub tau_star: Option<f64>,
    pub norm: f64,
    pub tolerance: f64,
    pub reasons: Vec<String>,
}

pub fn membership(b: &InitialData, ctx: &BarrierContext) -> Result<MembershipReport> {
    membership_with_tolerance(b, ctx, ctx.membership_tolerance())
}

/// Locates the unique downward zero of `b` in `[-eps, 0)` and checks both
/// barrier inequalities nodewise with slack `tolerance`.
pub fn membership_with_tolerance(
    b: &InitialData,
    ctx: &BarrierContext,
    tolerance: f64,
) -> Result<MembershipReport> {
    let eps = ctx.eps;
    if (b.grid.eps - eps).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "data grid eps {} differs from context eps {eps}",
            b.grid.eps
        )));
    }
    let mut reasons = Vec::new();
    if b.samples[0].abs() > 1e-12 {
        reasons.push(format!("b(-1-eps/2) = {:e} is not 0", b.samples[0]));
    }
    let rec = zeros_of_data(b);
    if !rec.touches.is_empty() {
        reasons.push(format!(
            "b touches zero without changing sign at {:?}",
            rec.touches
        ));
    }
    let tau = match rec.times.as_slice() {
        [t] if rec.signs_after[0] < 0 && *t >= -eps - 1e-12 && *t < 0.0 => (-t).min(eps),
        [] => {
            reasons.push("no sign change in (0, eps]".into());
            f64::NAN
        }
        [t] => {
            reasons.push(format!(
                "sign change at {t} is not a downward zero in [-eps, 0)"
            ));
            f64::NAN
        }
        many => {
            reasons.push(format!("{} sign changes, expected one", many.len()));
            f64::NAN
        }
    };
    let norm = b.sup_norm();
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    if tau.is_finite() {
        for (t, &v) in b.times().zip(&b.samples) {
            if t <= -tau {
                lower = lower.max(gamma_unchecked(ctx.alpha, eps, tau, t) - v);
            }
            if t >= -tau {
                upper = upper.max(v - ctx.alpha * phi0(tau, t));
            }
        }
        if lower > tolerance {
            reasons.push(format!("below gamma_tau by {lower:e}"));
        }
        if upper > tolerance {
            reasons.push(format!("above alpha phi0^tau by {upper:e}"));
        }
    }
    let member = reasons.is_empty();
    let member_r = member && tau >= ctx.tau0 && norm <= ctx.r + tolerance;
    Ok(MembershipReport {
        member,
        member_r,
        tau,
        worst_lower_violation: lower,
        worst_upper_violation: upper,
        tau_star: (tau > eps / 2.0).then(|| tau_star(eps, tau)),
        norm,
        tolerance,
        reasons,
    })
}

/// `h_tau(t) = t - (tau - eps/2)(t + 1 + eps/2)`
pub fn h_tau(eps: f64, tau: f64, t: f64) -> f64 {
    t - (tau - eps / 2.0) * (t + 1.0 + eps / 2.0)
}

pub fn h_tau_inverse(eps: f64, tau: f64, s: f64) -> f64 {
    (s + (tau - eps / 2.0) * (1.0 + eps / 2.0)) / (1.0 - tau + eps / 2.0)
}

/// Image of the first straightening map: the positive part moved onto
/// `[-1 - eps/2, -eps/2]` and the negative part onto `[-eps/2, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Xi1Image {
    pub grid: Grid,
    pub tau: f64,
    /// Nodes of `[-1 - eps/2, -eps/2]`.
    pub b1: Vec<f64>,
    /// Nodes of `[-eps/2, 0]`.
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Xi2Image {
    pub grid: Grid,
    pub tau: f64,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

fn part_nodes(g: &Grid) -> (Vec<f64>, Vec<f64>) {
    let k = g.steps_per_unit as i64;
    let m = g.m as i64;
    let first = (-(k + m)..=-m).map(|n| g.time(n)).collect();
    let second = (-m..=0).map(|n| g.time(n)).collect();
    (first, second)
}

pub fn xi1(b: &InitialData, ctx: &BarrierContext) -> Result<Xi1Image> {
    let rep = membership(b, ctx)?;
    if !rep.member {
        return Err(Error::NotMember(rep.reasons.join("; ")));
    }
    let (tau, eps, g) = (rep.tau, ctx.eps, b.grid);
    let (s1, s2) = part_nodes(&g);
    let mut b1: Vec<f64> = s1.iter().map(|&s| b.value_at(h_tau(eps, tau, s))).collect();
    let mut b2: Vec<f64> = s2
        .iter()
        .map(|&s| b.value_at(2.0 * tau * s / eps))
        .collect();
    b1[0] = 0.0;
    *b1.last_mut().unwrap() = 0.0;
    b2[0] = 0.0;
    Ok(Xi1Image {
        grid: g,
        tau,
        b1,
        b2,
    })
}

pub fn xi1_inverse(img: &Xi1Image) -> Result<InitialData> {
    let g = img.grid;
    let (eps, tau) = (g.eps, img.tau);
    let k = g.steps_per_unit as f64;
    let n0 = g.history_intervals() as i64;
    let samples = (0..=n0)
        .map(|i| {
            let t = g.time(i - n0);
            if t <= -tau {
                let s = h_tau_inverse(eps, tau, t);
                interpolate(&img.b1, (s + 1.0 + eps / 2.0) * k)
            } else {
                let s = eps * t / (2.0 * tau);
                interpolate(&img.b2, (s + eps / 2.0) * k)
            }
        })
        .collect();
    InitialData::from_samples(g, samples)
}

pub fn xi2(img: &Xi1Image, ctx: &BarrierContext) -> Result<Xi2Image> {
    ctx.check_tau(img.tau)?;
    let (eps, tau, alpha) = (ctx.eps, img.tau, ctx.alpha);
    let (s1, s2) = part_nodes(&img.grid);
    let w1 = s1
        .iter()
        .zip(&img.b1)
        .map(|(&s, &v)| v - gamma_unchecked(alpha, eps, tau, h_tau(eps, tau, s)))
        .collect();
    let w2 = s2
        .iter()
        .zip(&img.b2)
        .map(|(&s, &v)| v - alpha * phi0(tau, 2.0 * tau * s / eps))
        .collect();
    Ok(Xi2Image {
        grid: img.grid,
        tau,
        w1,
        w2,
    })
}

pub fn xi2_inverse(img: &Xi2Image, ctx: &BarrierContext) -> Result<Xi1Image> {
    ctx.check_tau(img.tau)?;
    let (eps, tau, alpha) = (ctx.eps, img.tau, ctx.alpha);
    let (s1, s2) = part_nodes(&img.grid);
    let b1 = s1
        .iter()
        .zip(&img.w1)
        .map(|(&s, &w)| w + gamma_unchecked(alpha, eps, tau, h_tau(eps, tau, s)))
        .collect();
    let b2 = s2
        .iter()
        .zip(&img.w2)
        .map(|(&s, &w)| w + alpha * phi0(tau, 2.0 * tau * s / eps))
        .collect();
    Ok(Xi1Image {
        grid: img.grid,
        tau,
        b1,
        b2,
    })
}

impl Xi2Image {
    /// `w1 >= 0`, `w2 <= 0` and `w1(-eps/2) = 0`, within `tol`.
    pub fn in_v_set(&self, tol: f64) -> bool {
        self.w1.iter().all(|&w| w >= -tol)
            && self.w2.iter().all(|&w| w <= tol)
            && self.w1.last().unwrap().abs() <= tol
    }
}

/// Certified member of the barrier set with zero near `-tau`, shaped as a
/// stretched sine of amplitude `factor * alpha`, optionally perturbed by a
/// seeded smooth multiplicative factor and clipped onto the barriers.
pub fn generate_initial(
    ctx: &BarrierContext,
    tau: f64,
    factor: f64,
    seed: Option<u64>,
) -> Result<InitialData> {
    let eps = ctx.eps;
    if !(tau >= ctx.tau0 && tau <= eps) {
        return Err(Error::Config(format!(
            "tau = {tau} outside [tau0 = {}, eps = {eps}]",
            ctx.tau0
        )));
    }
    if !(factor >= 1.0) {
        return Err(Error::Config(format!(
            "amplitude factor {factor} must be at least 1"
        )));
    }
    let g = ctx.grid;
    let len = 1.0 + eps / 2.0 - tau;
    let coeffs: Vec<f64> = match seed {
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (1..=4)
                .map(|k| rng.gen_range(-0.1..0.1) / k as f64)
                .collect()
        }
        None => Vec::new(),
    };
    let span = 1.0 + eps / 2.0;
    let b = InitialData::from_fn(g, |t| {
        let u = t + 1.0 + eps / 2.0;
        let base = factor * ctx.alpha * (PI * u / len).sin();
        let p: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * ((k + 1) as f64 * PI * u / span).sin())
            .sum();
        let v = base * (1.0 + p);
        if t < -tau {
            v.max(gamma_unchecked(ctx.alpha, eps, tau, t))
        } else if t > -tau {
            v.min(ctx.alpha * phi0(tau, t))
        } else {
            0.0
        }
    })?;
    let mut samples = b.samples;
    samples[0] = 0.0;
    let b = InitialData { grid: g, samples };
    let rep = membership(&b, ctx)?;
    if !rep.member_r {
        return Err(Error::Generation(rep.reasons.join("; ")));
    }
    Ok(b)
}

/// `n` certified members with seeded offsets `tau`, amplitude factors in
/// `[1.2, 3]` and perturbations.
pub fn corpus(ctx: &BarrierContext, n: usize, seed: u64) -> Result<Vec<(InitialData, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = ctx.tau0 + 0.05 * (ctx.eps - ctx.tau0);
    (0..n)
        .map(|_| {
            let tau = rng.gen_range(lo..=ctx.eps);
            let factor = rng.gen_range(1.2..=3.0);
            let s: u64 = rng.gen();
            generate_initial(ctx, tau, factor, Some(s)).map(|b| (b, tau))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// Largest `x_b - bound` on `[0, 1 - tau - eps/2]` for the upper estimate.
    pub upper_excess: f64,
    /// Largest `bound - x_b` on `[1 - tau + eps/2, 2 - tau - eps]` for the lower estimate.
    pub lower_excess: f64,
}

/// Spot check of the two continuation estimates for data with offset
/// `tau <= eps/2`.
pub fn estimate_check(
    b: &InitialData,
    ctx: &BarrierContext,
    f: &NonlinearitySpec,
    tau: f64,
) -> Result<EstimateReport> {
    ctx.check_tau(tau)?;
    let (eps, half) = (ctx.eps, ctx.eps / 2.0);
    if tau > half {
        return Err(Error::Domain(format!(
            "estimates are checked for tau <= eps/2, got {tau}"
        )));
    }
    let (x, _) = first_return(b, f)?;
    let c = ctx.alpha * ctx.contraction_factor();
    let g = x.grid;
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::NEG_INFINITY;
    for n in 0..=x.end_node() {
        let (t, v) = (g.time(n), x.node_value(n));
        if t <= 1.0 - tau - half {
            // the shifted sines are monotone in the shift on this range
            let bound = c * phi0(tau, t).min(phi0(half, t));
            upper = upper.max(v - bound);
        }
        if t >= 1.0 - tau + half && t <= 2.0 - tau - eps {
            lower = lower.max(c * phi0(tau, t) - v);
        }
    }
    Ok(EstimateReport {
        upper_excess: upper,
        lower_excess: lower,
    })
}
