//! Feedback nonlinearities: the simulation catalog, user piecewise specs,
//! validation of the negative-feedback frame, and the associated constants.

mod expr;

pub use expr::Expr;

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{bisect, scan_roots};

pub const DEFAULT_DOMAIN: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Kind {
    /// `-2 atan(x + tan(1/2)) + 1`
    AtanShifted,
    /// `-x - 3 sin(pi x / 3)` on `[-3, 3]`, clamped to `-+3` outside.
    OddSineClipped,
    /// `-x - sin(pi x / 3)` on `[-3, 0]`, `-x - sin(pi x) / 3` on `[0, 3]`,
    /// clamped to `-+3` outside.
    AsymmetricSineClipped,
    Linear {
        slope: f64,
    },
    /// `alpha x exp(-x)`
    Ricker {
        alpha: f64,
    },
    /// Piece `i` applies on `(breakpoints[i-1], breakpoints[i]]`.
    UserPiecewise {
        breakpoints: Vec<f64>,
        pieces: Vec<Expr>,
    },
    /// `base(t + kappa) - base(kappa)` for `t >= x_clamp - kappa`, constant
    /// `base(x_clamp) - base(kappa)` below. Equals `f(t + kappa) - kappa`
    /// up to the fixed-point residual of `kappa`, with `F(0) = 0` exactly.
    ShiftedClamp {
        base: Box<Kind>,
        kappa: f64,
        x_clamp: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    #[serde(flatten)]
    pub kind: Kind,
    #[serde(default = "default_domain")]
    pub eval_domain: (f64, f64),
}

fn default_domain() -> (f64, f64) {
    DEFAULT_DOMAIN
}

fn clip3(x: f64, inner: impl Fn(f64) -> f64) -> f64 {
    if x <= -3.0 {
        3.0
    } else if x >= 3.0 {
        -3.0
    } else {
        inner(x)
    }
}

impl Kind {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Kind::AtanShifted => -2.0 * (x + 0.5f64.tan()).atan() + 1.0,
            Kind::OddSineClipped => clip3(x, |x| -x - 3.0 * (PI * x / 3.0).sin()),
            Kind::AsymmetricSineClipped => clip3(x, |x| {
                if x <= 0.0 {
                    -x - (PI * x / 3.0).sin()
                } else {
                    -x - (PI * x).sin() / 3.0
                }
            }),
            Kind::Linear { slope } => slope * x,
            Kind::Ricker { alpha } => alpha * x * (-x).exp(),
            Kind::UserPiecewise {
                breakpoints,
                pieces,
            } => {
                let i = breakpoints.partition_point(|&b| b < x);
                pieces[i].eval(x)
            }
            Kind::ShiftedClamp {
                base,
                kappa,
                x_clamp,
            } => {
                if x >= x_clamp - kappa {
                    base.eval(x + kappa) - base.eval(*kappa)
                } else {
                    base.eval(*x_clamp) - base.eval(*kappa)
                }
            }
        }
    }

    /// Closed-form derivative where the catalog provides one.
    fn derivative(&self, x: f64) -> Option<f64> {
        match self {
            Kind::AtanShifted => {
                let s = x + 0.5f64.tan();
                Some(-2.0 / (1.0 + s * s))
            }
            Kind::OddSineClipped => (x.abs() < 3.0).then(|| -1.0 - PI * (PI * x / 3.0).cos()),
            Kind::AsymmetricSineClipped => {
                if x.abs() >= 3.0 {
                    None
                } else if x < 0.0 {
                    Some(-1.0 - PI / 3.0 * (PI * x / 3.0).cos())
                } else if x > 0.0 {
                    Some(-1.0 - PI / 3.0 * (PI * x).cos())
                } else {
                    // both one-sided slopes equal -1 - pi/3
                    Some(-1.0 - PI / 3.0)
                }
            }
            Kind::Linear { slope } => Some(*slope),
            Kind::Ricker { alpha } => Some(alpha * (-x).exp() * (1.0 - x)),
            Kind::UserPiecewise { .. } => None,
            Kind::ShiftedClamp {
                base,
                kappa,
                x_clamp,
            } => {
                if x > x_clamp - kappa {
                    base.derivative(x + kappa)
                } else {
                    None
                }
            }
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Kind::Linear { slope } if !slope.is_finite() => {
                Err(Error::Config("linear slope must be finite".into()))
            }
            Kind::Ricker { alpha } if !(alpha.is_finite() && *alpha > 0.0) => {
                Err(Error::Config("ricker alpha must be positive".into()))
            }
            Kind::UserPiecewise {
                breakpoints,
                pieces,
            } => {
                if pieces.len() != breakpoints.len() + 1 {
                    return Err(Error::Config(format!(
                        "piecewise spec needs {} pieces for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        pieces.len()
                    )));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1]))
                    || breakpoints.iter().any(|b| !b.is_finite())
                {
                    return Err(Error::Config(
                        "breakpoints must be finite and strictly increasing".into(),
                    ));
                }
                if !pieces.iter().all(Expr::is_finite) {
                    return Err(Error::Config("piece parameters must be finite".into()));
                }
                Ok(())
            }
            Kind::ShiftedClamp {
                base,
                kappa,
                x_clamp,
            } => {
                if !(kappa.is_finite() && x_clamp.is_finite() && x_clamp < kappa) {
                    return Err(Error::Config(
                        "shifted clamp needs finite x_clamp < kappa".into(),
                    ));
                }
                base.check()
            }
            _ => Ok(()),
        }
    }
}

impl NonlinearitySpec {
    pub fn new(kind: Kind) -> Result<Self> {
        Self::with_domain(kind, DEFAULT_DOMAIN)
    }

    pub fn with_domain(kind: Kind, eval_domain: (f64, f64)) -> Result<Self> {
        kind.check()?;
        let (lo, hi) = eval_domain;
        if !(lo.is_finite() && hi.is_finite() && lo < 0.0 && 0.0 < hi) {
            return Err(Error::Config(format!(
                "eval_domain ({lo}, {hi}) must be finite and contain 0 in its interior"
            )));
        }
        Ok(Self { kind, eval_domain })
    }

    pub fn atan_shifted() -> Self {
        Self {
            kind: Kind::AtanShifted,
            eval_domain: DEFAULT_DOMAIN,
        }
    }

    pub fn odd_sine_clipped() -> Self {
        Self {
            kind: Kind::OddSineClipped,
            eval_domain: DEFAULT_DOMAIN,
        }
    }

    pub fn asymmetric_sine_clipped() -> Self {
        Self {
            kind: Kind::AsymmetricSineClipped,
            eval_domain: DEFAULT_DOMAIN,
        }
    }

    pub fn linear(slope: f64) -> Self {
        Self {
            kind: Kind::Linear { slope },
            eval_domain: DEFAULT_DOMAIN,
        }
    }

    pub fn ricker(alpha: f64) -> Self {
        Self {
            kind: Kind::Ricker { alpha },
            eval_domain: DEFAULT_DOMAIN,
        }
    }

    /// Re-check parameters of a spec built by hand or deserialized.
    pub fn check(&self) -> Result<()> {
        Self::with_domain(self.kind.clone(), self.eval_domain).map(|_| ())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.kind.eval(x)
    }

    pub fn closed_form_derivative(&self, x: f64) -> Option<f64> {
        self.kind.derivative(x)
    }

    /// Slope at 0: closed form for catalog kinds, otherwise central
    /// differences at two step sizes with a Richardson consistency check
    /// and a one-sided agreement test that detects kinks.
    pub fn derivative_at_zero(&self) -> Result<f64> {
        if let Some(d) = self.kind.derivative(0.0) {
            return Ok(d);
        }
        finite_difference_slope(|x| self.eval(x), 0.0)
    }

    /// Slope at `x`, closed form when available.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        match self.kind.derivative(x) {
            Some(d) => Ok(d),
            None => finite_difference_slope(|y| self.eval(y), x),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            Kind::AtanShifted => "atan-shifted",
            Kind::OddSineClipped => "odd-sine-clipped",
            Kind::AsymmetricSineClipped => "asymmetric-sine-clipped",
            Kind::Linear { .. } => "linear",
            Kind::Ricker { .. } => "ricker",
            Kind::UserPiecewise { .. } => "user-piecewise",
            Kind::ShiftedClamp { .. } => "shifted-clamp",
        }
    }
}

/// Parses `atan-shifted`, `odd-sine-clipped`, `asymmetric-sine-clipped`,
/// `linear:<slope>` and `ricker:<alpha>`.
impl FromStr for NonlinearitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, arg) = match s.split_once(':') {
            Some((t, a)) => (t.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |name: &str| -> Result<f64> {
            arg.ok_or_else(|| {
                Error::Config(format!("`{tag}` needs a parameter, as in `{tag}:<{name}>`"))
            })?
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("bad {name} for `{tag}`: {e}")))
        };
        let kind = match tag {
            "atan-shifted" => Kind::AtanShifted,
            "odd-sine-clipped" => Kind::OddSineClipped,
            "asymmetric-sine-clipped" => Kind::AsymmetricSineClipped,
            "linear" => Kind::Linear {
                slope: num("slope")?,
            },
            "ricker" => Kind::Ricker {
                alpha: num("alpha")?,
            },
            other => return Err(Error::Config(format!("unknown nonlinearity tag `{other}`"))),
        };
        if arg.is_some()
            && matches!(
                kind,
                Kind::AtanShifted | Kind::OddSineClipped | Kind::AsymmetricSineClipped
            )
        {
            return Err(Error::Config(format!("`{tag}` takes no parameter")));
        }
        NonlinearitySpec::new(kind)
    }
}

fn finite_difference_slope(f: impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    let central = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let d1 = central(1e-4);
    let d2 = central(1e-5);
    let scale = d2.abs().max(1.0);
    let richardson = (100.0 * d2 - d1) / 99.0;
    if !(d1.is_finite() && d2.is_finite()) {
        return Err(Error::Estimation {
            reason: "non-finite difference quotient".into(),
            residual: f64::NAN,
        });
    }
    let spread = (d1 - d2).abs();
    if spread > 1e-5 * scale {
        return Err(Error::Estimation {
            reason: "central differences at h = 1e-4 and 1e-5 disagree".into(),
            residual: spread,
        });
    }
    let h = 1e-6;
    let forward = (f(x + h) - f(x)) / h;
    let backward = (f(x) - f(x - h)) / h;
    let kink = (forward - backward).abs();
    if kink > 1e-3 * scale {
        return Err(Error::Estimation {
            reason: "one-sided slopes differ, the function has a corner".into(),
            residual: kink,
        });
    }
    Ok(richardson)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub negative_feedback_ok: bool,
    pub fprime0: f64,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub tail_ok: bool,
    pub violations: Vec<Violation>,
    /// Negative feedback, `f'(0) < -1`, and the tail conditions all hold.
    pub pass: bool,
    /// `f'(0) < -2`, required for the periodic-orbit existence result.
    pub strong_feedback: bool,
}

/// Samples the negative-feedback condition, computes `f'(0)`, locates the
/// first crossings of `f(x) = -x` on either side of 0, and checks the tail
/// conditions at the edges of the evaluation domain.
pub fn validate(spec: &NonlinearitySpec, n_samples: usize) -> FeedbackReport {
    let (lo, hi) = spec.eval_domain;
    let n = n_samples.max(3);
    let mut violations = Vec::new();
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        if x == 0.0 {
            continue;
        }
        let fx = spec.eval(x);
        if !fx.is_finite() {
            violations.push(Violation {
                x,
                reason: format!("f(x) = {fx} is not finite"),
            });
        } else if x * fx >= 0.0 {
            violations.push(Violation {
                x,
                reason: format!("x f(x) = {:e} is not negative", x * fx),
            });
        }
    }
    let negative_feedback_ok = violations.is_empty();

    let fprime0 = match spec.derivative_at_zero() {
        Ok(d) => d,
        Err(e) => {
            violations.push(Violation {
                x: 0.0,
                reason: e.to_string(),
            });
            f64::NAN
        }
    };
    if fprime0.is_nan() || fprime0 >= -1.0 {
        violations.push(Violation {
            x: 0.0,
            reason: format!("f'(0) = {fprime0} is not below -1"),
        });
    }

    let g = |x: f64| spec.eval(x) + x;
    let step = (hi - lo) / 1e5;
    let kappa2 = first_crossing(&g, step, hi);
    let kappa1 = first_crossing(&g, -step, lo);

    let tail_ok = tail_conditions(spec, &mut violations);
    let pass = negative_feedback_ok && fprime0 < -1.0 && tail_ok;
    FeedbackReport {
        negative_feedback_ok,
        fprime0,
        kappa1,
        kappa2,
        tail_ok,
        violations,
        pass,
        strong_feedback: pass && fprime0 < -2.0,
    }
}

/// First sign change of `g` walking away from 0 toward `edge`. Near 0 the
/// function `f(x) + x` has the sign of `(f'(0) + 1) x`, so the walk starts
/// one step out.
fn first_crossing(g: &impl Fn(f64) -> f64, step: f64, edge: f64) -> Option<f64> {
    let mut x0 = step;
    let mut g0 = g(x0);
    if g0 == 0.0 {
        return None;
    }
    loop {
        let x1 = x0 + step;
        if (step > 0.0 && x1 > edge) || (step < 0.0 && x1 < edge) {
            return None;
        }
        let g1 = g(x1);
        if g1 == 0.0 {
            return Some(x1);
        }
        if g1.signum() != g0.signum() {
            return bisect(g, x0, x1, 1e-12).ok();
        }
        x0 = x1;
        g0 = g1;
    }
}

/// Heuristic reading of the asymptotic sign conditions at the domain edges:
/// `f` must keep the feedback sign near both edges and `|f|` must not grow
/// faster than the identity there.
fn tail_conditions(spec: &NonlinearitySpec, violations: &mut Vec<Violation>) -> bool {
    let (lo, hi) = spec.eval_domain;
    let width = hi - lo;
    let mut ok = true;
    for &(edge, inward) in &[(lo, 1.0), (hi, -1.0)] {
        for k in 0..5 {
            let x = edge + inward * width * 0.01 * k as f64;
            let fx = spec.eval(x);
            if !(fx.is_finite() && x * fx < 0.0) {
                violations.push(Violation {
                    x,
                    reason: "tail lost the feedback sign".into(),
                });
                ok = false;
            }
        }
        let x = edge;
        if spec.eval(x).abs() > 10.0 * x.abs() + 10.0 {
            violations.push(Violation {
                x,
                reason: "tail grows faster than linearly".into(),
            });
            ok = false;
        }
    }
    ok
}

/// Roots of `f(f(x)) - x` on `interval`, scanned at spacing
/// `max(tol, width / 2e6)` and refined by bisection.
pub fn period_two_points(
    spec: &NonlinearitySpec,
    interval: (f64, f64),
    tol: f64,
) -> Result<Vec<f64>> {
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite() && a < b && tol > 0.0) {
        return Err(Error::Config(format!(
            "bad search interval ({a}, {b}) or tol {tol}"
        )));
    }
    let step = tol.max((b - a) / 2e6);
    let mut roots = scan_roots(|x| spec.eval(spec.eval(x)) - x, a, b, step);
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConstants {
    /// Half-width of the monotone core where every larger `|x|` has larger `|f|`.
    pub a0: f64,
    /// Beyond this radius `|f(x)| < |x|`.
    pub big_a0: f64,
    /// Invariant radius, at least `max |f|` on `[-A0, A0]`.
    pub r: f64,
}

const CONST_GRID: usize = 100_000;

/// Constants of the uniform bound, sampled on a symmetric grid inside the
/// evaluation domain.
pub fn analysis_constants(spec: &NonlinearitySpec, r_floor: f64) -> Result<AnalysisConstants> {
    let (lo, hi) = spec.eval_domain;
    let l = (-lo).min(hi);
    let n = CONST_GRID;
    let h = l / n as f64;
    let xs: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let fp: Vec<f64> = xs.iter().map(|&x| spec.eval(x)).collect();
    let fm: Vec<f64> = xs.iter().map(|&x| spec.eval(-x)).collect();

    // suffix minimum of min(|f(x)|, |f(-x)|) over k' >= k
    let mut suffix_min = vec![f64::INFINITY; n + 2];
    for k in (0..=n).rev() {
        suffix_min[k] = suffix_min[k + 1].min(fp[k].abs()).min(fm[k].abs());
    }
    let mut a0 = 0.0;
    for k in 1..=n {
        let monotone = fp[k] < fp[k - 1] && fm[k] > fm[k - 1];
        let core_max = fm[k].abs().max(fp[k].abs());
        if !(monotone && suffix_min[k] >= core_max) {
            break;
        }
        a0 = xs[k];
    }
    if a0 <= 0.0 {
        return Err(Error::Validation(
            "f is not strictly monotone near 0 on the sampling grid".into(),
        ));
    }

    let mut last_bad = None;
    for k in (0..=n).rev() {
        if fp[k].abs() >= xs[k] || fm[k].abs() >= xs[k] {
            last_bad = Some(k);
            break;
        }
    }
    let big_a0 = match last_bad {
        Some(k) if k == n => {
            return Err(Error::Validation(format!(
                "|f(x)| < |x| never holds up to |x| = {l}; widen eval_domain"
            )))
        }
        Some(k) => xs[k + 1],
        None => xs[0],
    };

    let kmax = ((big_a0 / h).round() as usize).min(n);
    let mut r = r_floor;
    for (vals, sign) in [(&fp, 1.0), (&fm, -1.0)] {
        for k in 0..=kmax {
            let left = if k > 0 { vals[k - 1].abs() } else { 0.0 };
            let right = if k < kmax { vals[k + 1].abs() } else { 0.0 };
            let v = vals[k].abs();
            if v >= left && v >= right && v > 0.0 {
                let a = xs[k.saturating_sub(1)];
                let b = xs[(k + 1).min(kmax)];
                let peak = refine_abs_max(|x| spec.eval(sign * x), a, b);
                r = r.max(peak).max(v);
            }
        }
    }
    Ok(AnalysisConstants { a0, big_a0, r })
}

fn refine_abs_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = |x: f64| f(x).abs();
    let mut best = g(a).max(g(b));
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        let (g1, g2) = (g(m1), g(m2));
        best = best.max(g1).max(g2);
        if g1 < g2 {
            a = m1;
        } else {
            b = m2;
        }
    }
    best
}
