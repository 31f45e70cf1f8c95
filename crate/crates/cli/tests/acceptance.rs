//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volterra_cli::{parse_config, run, Command, Settings};
use volterra_core::barriers::{
    self, budget, corpus, eigencheck, eps0, membership, sinc, BarrierContext,
};
use volterra_core::gurtin::{self, kappa_fixed_point, DemoOptions, GurtinConfig};
use volterra_core::limit::{sweep, DEFAULT_INTERVAL};
use volterra_core::nonlinearity::{analysis_constants, period_two_points};
use volterra_core::oscillation::{
    classify, find_periodic, first_return, one_sided_slopes_at_z1, poincare, PeriodicOptions,
};
use volterra_core::trajectory::sup_bound_check;
use volterra_core::{extend, make_default_grid, InitialData, NonlinearitySpec};

const CORPUS_SEED: u64 = 2024;
const CORPUS_SIZE: usize = 50;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Corpus {
    ctx: BarrierContext,
    f: NonlinearitySpec,
    members: Vec<(InitialData, f64)>,
}

fn build_corpus() -> Corpus {
    let f = NonlinearitySpec::odd_sine_clipped();
    let g = make_default_grid(0.1).unwrap();
    let ctx = budget(&f, &g, 0.0).unwrap();
    let members = corpus(&ctx, CORPUS_SIZE, CORPUS_SEED).unwrap();
    Corpus { ctx, f, members }
}

fn c1_eigen() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut min_reduction = f64::INFINITY;
    for (eps, fp) in [(0.25, -2.5), (0.1, -4.0)] {
        let r = eigencheck(eps, fp, 50).map_err(|e| e.to_string())?;
        let r_half = eigencheck(eps, fp, 100).map_err(|e| e.to_string())?;
        worst = worst.max(r);
        min_reduction = min_reduction.min(r / r_half);
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst <= 1e-8 && min_reduction >= 8.0 && secs < 1.0,
        format!("max residual {worst:.2e}, min reduction {min_reduction:.1}x, {secs:.2}s"),
    )
}

fn c2_slow_oscillation(c: &Corpus) -> Outcome {
    let t = Instant::now();
    let g = c.ctx.grid;
    let (eps, dt) = (g.eps, g.dt());
    let (lo, hi) = (1.0 - eps / 2.0 - 2.0 * dt, 1.0 + eps / 2.0 + 2.0 * dt);
    let mut bad = Vec::new();
    let (mut gmin, mut gmax) = (f64::INFINITY, 0.0f64);
    for (i, (b, _)) in c.members.iter().enumerate() {
        let x = extend(b, &c.f, 50.0).map_err(|e| e.to_string())?;
        let v = classify(&x, (0.0, 50.0)).map_err(|e| e.to_string())?;
        gmin = gmin.min(v.min_gap);
        gmax = gmax.max(v.max_gap);
        if !(v.slowly_oscillating && !v.degenerate && v.min_gap > lo && v.max_gap < hi) {
            bad.push(i);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        bad.is_empty() && secs < 30.0,
        format!("{} members, gaps in [{gmin:.4}, {gmax:.4}] vs ({lo:.4}, {hi:.4}), failures {bad:?}, {secs:.2}s", c.members.len()),
    )
}

fn c3_z1(c: &Corpus) -> Outcome {
    let g = c.ctx.grid;
    let (eps, dt) = (g.eps, g.dt());
    let mut bad = Vec::new();
    let mut min_slope = f64::INFINITY;
    for (i, (b, tau)) in c.members.iter().enumerate() {
        let (_, z1) = first_return(b, &c.f).map_err(|e| e.to_string())?;
        let (l, r) = one_sided_slopes_at_z1(b, &c.f).map_err(|e| e.to_string())?;
        min_slope = min_slope.min(l.min(r));
        let inside = z1 > 1.0 - tau - eps / 2.0 - 2.0 * dt && z1 < 1.0 - tau + eps / 2.0 + 2.0 * dt;
        if !(inside && l > 0.0 && r > 0.0) {
            bad.push(i);
        }
    }
    check(
        bad.is_empty(),
        format!("min one-sided slope {min_slope:.4}, failures {bad:?}"),
    )
}

fn c4_invariance(c: &Corpus) -> Outcome {
    let g = c.ctx.grid;
    let slack = 1e-9 + 2.0 * g.dt() * (2.0 * c.ctx.r / g.eps);
    let mut bad = Vec::new();
    let mut min_tau = f64::INFINITY;
    for (i, (b, _)) in c.members.iter().enumerate() {
        let img = poincare(b, &c.f).map_err(|e| e.to_string())?.segment;
        let rep = membership(&img, &c.ctx).map_err(|e| e.to_string())?;
        min_tau = min_tau.min(rep.tau);
        if !(rep.member_r && rep.tau >= c.ctx.tau0 && img.sup_norm() <= c.ctx.r + slack) {
            bad.push(i);
        }
    }
    check(
        bad.is_empty(),
        format!(
            "min tau of images {min_tau:.4} >= tau0 {:.2e}, failures {bad:?}",
            c.ctx.tau0
        ),
    )
}

fn c5_boundedness() -> Outcome {
    let f = NonlinearitySpec::odd_sine_clipped();
    let g = make_default_grid(0.1).unwrap();
    let r = analysis_constants(&f, 0.0).map_err(|e| e.to_string())?.r;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let coeffs: Vec<(f64, f64)> = (1..=6)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let raw = InitialData::from_fn(g, |t| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, p))| a * ((k + 1) as f64 * PI * t + p).sin())
                .sum()
        })
        .unwrap();
        let scale = rng.gen_range(0.0..=1.0) * r / raw.sup_norm();
        let b =
            InitialData::from_samples(g, raw.samples.iter().map(|v| v * scale).collect()).unwrap();
        let x = extend(&b, &f, 100.0).map_err(|e| e.to_string())?;
        if !sup_bound_check(&x, r) {
            return Err(format!("sup {} exceeds R = {r}", x.sup_norm()));
        }
        worst = worst.max(x.sup_norm());
    }
    check(
        worst <= r + 1e-9,
        format!("20 runs on [0, 100], max sup {worst:.6} <= R = {r:.6}"),
    )
}

fn c6_periodic() -> Outcome {
    let t = Instant::now();
    let f = NonlinearitySpec::atan_shifted();
    let p2 = period_two_points(&f, f.eval_domain, 1e-6).map_err(|e| e.to_string())?;
    let (q_lo, q_hi) = (p2[0], *p2.last().unwrap());
    let mut details = Vec::new();
    let mut ok = true;
    for eps in [0.3, 0.01] {
        let g = make_default_grid(eps).unwrap();
        let b = InitialData::constant(g, 1.0).unwrap();
        let res = find_periodic(&b, &f, PeriodicOptions::default()).map_err(|e| e.to_string())?;
        let Some(o) = res.orbit() else {
            return Err(format!("no periodic orbit at eps = {eps}"));
        };
        ok &= o.residual <= 1e-8 && (o.period - 2.0).abs() < eps;
        if eps == 0.01 {
            let rel = ((o.extremes.0 - q_lo) / q_lo)
                .abs()
                .max(((o.extremes.1 - q_hi) / q_hi).abs());
            ok &= rel <= 0.02;
            details.push(format!(
                "eps {eps}: extremes within {:.2e} (relative) of ({q_lo:.4}, {q_hi:.4})",
                rel
            ));
        }
        details.push(format!(
            "eps {eps}: period {:.6}, residual {:.1e}",
            o.period, o.residual
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        ok && secs < 60.0,
        format!("{}, {secs:.2}s", details.join("; ")),
    )
}

fn c7_limit() -> Outcome {
    let t = Instant::now();
    let eps_list = [0.3, 0.1, 0.03, 0.01];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, f) in [
        ("atan", NonlinearitySpec::atan_shifted()),
        ("odd sine", NonlinearitySpec::odd_sine_clipped()),
    ] {
        let sw = sweep(&f, &eps_list, DEFAULT_INTERVAL, PeriodicOptions::default())
            .map_err(|e| e.to_string())?;
        let last = sw.rows.last().unwrap();
        let mono = sw.sup_error_monotone()
            && sw.l1_error_monotone()
            && sw.rows.iter().all(|r| r.converged);
        let gibbs = if name == "atan" {
            last.overshoot <= 0.005 * sw.orbits.last().unwrap().extremes.1
        } else {
            let kappa0 = sw.levels.hi;
            last.overshoot >= 0.01 * kappa0
        };
        ok &= mono && gibbs;
        let sups: Vec<String> = sw
            .rows
            .iter()
            .map(|r| format!("{:.1e}", r.sup_error))
            .collect();
        let l1s: Vec<String> = sw
            .rows
            .iter()
            .map(|r| format!("{:.3}", r.l1_error))
            .collect();
        details.push(format!(
            "{name}: sup [{}], L1 [{}], overshoot at 0.01 = {:.4}",
            sups.join(" "),
            l1s.join(" "),
            last.overshoot
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        ok && secs < 300.0,
        format!("{}; {secs:.2}s", details.join("; ")),
    )
}

fn c8_round_trips(c: &Corpus) -> Outcome {
    let g = c.ctx.grid;
    let bound1 = 2.0 * g.dt() * (2.0 * c.ctx.r / g.eps);
    let (mut w1, mut w2) = (0.0f64, 0.0f64);
    for (b, _) in &c.members {
        let img = barriers::xi1(b, &c.ctx).map_err(|e| e.to_string())?;
        let v = barriers::xi2(&img, &c.ctx).map_err(|e| e.to_string())?;
        let back = barriers::xi2_inverse(&v, &c.ctx).map_err(|e| e.to_string())?;
        let again = barriers::xi2(&back, &c.ctx).map_err(|e| e.to_string())?;
        for (x, y) in
            v.w1.iter()
                .chain(&v.w2)
                .zip(again.w1.iter().chain(&again.w2))
        {
            w2 = w2.max((x - y).abs());
        }
        let b_back = barriers::xi1_inverse(&img).map_err(|e| e.to_string())?;
        let img2 = barriers::xi1(&b_back, &c.ctx).map_err(|e| e.to_string())?;
        for (x, y) in img
            .b1
            .iter()
            .chain(&img.b2)
            .zip(img2.b1.iter().chain(&img2.b2))
        {
            w1 = w1.max((x - y).abs());
        }
    }
    check(
        w2 <= 1e-12 && w1 <= bound1,
        format!("xi2 defect {w2:.1e} <= 1e-12, xi1 defect {w1:.2e} <= {bound1:.2e}"),
    )
}

/// Independent bisection for `sin(x)/x = 1/2` on `(0, pi)`.
fn sinc_half_root() -> f64 {
    let (mut a, mut b) = (1e-3f64, PI);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid.sin() / mid > 0.5 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn c9_eps0() -> Outcome {
    let e = eps0(-4.0).map_err(|e| e.to_string())?;
    let residual = (sinc(PI * e / 2.0) - 0.5).abs();
    let oracle = 2.0 * sinc_half_root() / PI;
    let rejects = eps0(-2.0).is_err() && eps0(-1.5).is_err();
    check(
        residual <= 1e-12 && (e - oracle).abs() <= 1e-12 && rejects,
        format!("eps0(-4) = {e:.12}, sinc residual {residual:.1e}, oracle gap {:.1e}, rejects f'(0) >= -2: {rejects}", (e - oracle).abs()),
    )
}

fn c10_gurtin() -> Outcome {
    let mut kmax: f64 = 0.0;
    for (mu, eps) in [(0.0, 0.25), (0.5, 0.1), (2.0, 0.3)] {
        kmax = kmax.max((gurtin::kernel_check(mu, eps).map_err(|e| e.to_string())? - 1.0).abs());
    }
    let k2 = kappa_fixed_point(
        &NonlinearitySpec::ricker(std::f64::consts::E.powi(2)),
        (0.5, 5.0),
    )
    .map_err(|e| e.to_string())?;
    let alpha = 3.1f64.exp();
    let cfg =
        GurtinConfig::new(NonlinearitySpec::ricker(alpha), 0.2, 0.25).map_err(|e| e.to_string())?;
    let demo = gurtin::asymptotic_demo(&cfg, &[5.0, 10.0], DemoOptions::default())
        .map_err(|e| e.to_string())?;
    let ok = kmax <= 1e-12
        && (k2 - 2.0).abs() <= 1e-12
        && demo.min_birth > 0.0
        && demo.b_residual <= 1e-8
        && demo.clamp_inactive
        && demo.snapshots.iter().all(|s| s.u.iter().all(|&u| u >= 0.0));
    check(
        ok,
        format!(
            "kernel defect {kmax:.1e}, kappa(e^2) = {k2}, alpha = e^3.1: period {:.5}, min birth {:.4}, B residual {:.1e}",
            demo.orbit.period, demo.min_birth, demo.b_residual
        ),
    )
}

fn corpus_bytes(c: &Corpus) -> Vec<u8> {
    let mut out = Vec::new();
    for (b, _) in &c.members {
        extend(b, &c.f, 50.0).unwrap().write_csv(&mut out).unwrap();
    }
    out
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c11_determinism(c: &Corpus) -> Outcome {
    let again = build_corpus();
    let same_corpus = corpus_bytes(c) == corpus_bytes(&again);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut same_runs = true;
    let mut files = 0;
    for (command, settings) in [
        (
            Command::Periodic,
            Settings {
                f: Some("atan-shifted".into()),
                eps: Some(0.3),
                ..Settings::default()
            },
        ),
        (
            Command::Periodic,
            Settings {
                f: Some("atan-shifted".into()),
                eps: Some(0.01),
                ..Settings::default()
            },
        ),
        (
            Command::Simulate,
            Settings {
                f: Some("odd-sine-clipped".into()),
                eps: Some(0.1),
                horizon: Some(50.0),
                b0: Some("generator:tau=0.05,factor=2".into()),
                seed: Some(CORPUS_SEED),
                ..Settings::default()
            },
        ),
    ] {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = tmp
                .path()
                .join(format!("{command}-{}-{k}", settings.eps.unwrap()));
            let s = Settings {
                out_dir: Some(out.clone()),
                ..settings.clone()
            };
            let cfg = parse_config(Some(command), None, s).map_err(|e| e.to_string())?;
            if run(&cfg) != 0 {
                return Err(format!("{command} run failed"));
            }
            let mut bytes = dir_bytes(&out);
            // the echoed out_dir legitimately differs
            for (name, content) in bytes.iter_mut() {
                if name == "summary.json" {
                    let text =
                        String::from_utf8_lossy(content).replace(&out.display().to_string(), "OUT");
                    *content = text.into_bytes();
                }
            }
            outputs.push(bytes);
        }
        files += outputs[0].len();
        same_runs &= outputs[0] == outputs[1];
    }
    check(same_corpus && same_runs, format!("corpus continuations identical: {same_corpus}; {files} CLI output files identical: {same_runs}"))
}

fn main() -> ExitCode {
    let corpus = build_corpus();
    let criteria: Vec<Criterion> = vec![
        ("eigen-identity", Box::new(c1_eigen)),
        (
            "slow oscillation",
            Box::new(|| c2_slow_oscillation(&corpus)),
        ),
        ("z1 localization", Box::new(|| c3_z1(&corpus))),
        ("invariance", Box::new(|| c4_invariance(&corpus))),
        ("boundedness", Box::new(c5_boundedness)),
        ("periodic orbit", Box::new(c6_periodic)),
        ("singular limit", Box::new(c7_limit)),
        ("xi round trips", Box::new(|| c8_round_trips(&corpus))),
        ("threshold eps0", Box::new(c9_eps0)),
        ("population model", Box::new(c10_gurtin)),
        ("determinism", Box::new(|| c11_determinism(&corpus))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
