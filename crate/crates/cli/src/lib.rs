//! Command-line front end: resolves a [`RunConfig`], runs one command and
//! writes CSV files plus `summary.json` into the output directory.
//!
//! Exit codes: 0 success, 1 numerical failure (non-convergence, collapse,
//! divergence), 2 usage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use volterra_core::barriers::{self, budget, membership, BarrierContext};
use volterra_core::gurtin::{self, DemoOptions, GurtinConfig};
use volterra_core::limit::{self, DEFAULT_INTERVAL};
use volterra_core::nonlinearity::{analysis_constants, period_two_points, validate};
use volterra_core::oscillation::{classify, find_periodic, PeriodicOptions, PeriodicSearch};
use volterra_core::trajectory::{sup_bound_check, BOUND_SLACK};
use volterra_core::{default_m, extend, make_grid, Error, Grid, InitialData, NonlinearitySpec};

pub use config::{parse_config, Command, RunConfig, Settings, UsageError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Failed,
    UsageError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEcho {
    pub eps_requested: f64,
    pub eps: f64,
    pub m: usize,
    pub steps_per_unit: usize,
    pub dt: f64,
}

impl From<Grid> for GridEcho {
    fn from(g: Grid) -> Self {
        Self {
            eps_requested: g.eps_requested,
            eps: g.eps,
            m: g.m,
            steps_per_unit: g.steps_per_unit,
            dt: g.dt(),
        }
    }
}

/// Written to `summary.json` on every run that gets as far as an output
/// directory. Wall time goes to `timing.json` so that the summary itself is
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub status: Status,
    pub exit_code: i32,
    pub failure: Option<String>,
    pub config: Settings,
    pub grid: Option<GridEcho>,
    pub context: Option<Value>,
    pub notes: Vec<String>,
    pub files: Vec<String>,
    pub results: Value,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Usage(m),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(format!("i/o: {e}"))
    }
}

struct Run<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    grid: Option<Grid>,
    context: Option<Value>,
    notes: Vec<String>,
    files: Vec<String>,
    results: Value,
    /// Set when the command finished but its numerical goal was not met.
    soft_failure: Option<String>,
    /// One line for stdout.
    headline: String,
}

impl Run<'_> {
    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<(), Failure> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_owned());
        Ok(())
    }

    fn grid(&mut self, eps: f64) -> Result<Grid, Failure> {
        let m = self.cfg.settings.m.unwrap_or_else(|| default_m(eps));
        let g = make_grid(eps, m)?;
        self.grid = Some(g);
        Ok(g)
    }

    fn set_context(&mut self, ctx: &BarrierContext) {
        self.context = serde_json::to_value(ctx).ok();
    }
}

/// Runs the command and returns its exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let started = Instant::now();
    let dir = cfg.out_dir();
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return EXIT_USAGE;
    }
    let mut r = Run {
        cfg,
        dir: dir.clone(),
        grid: None,
        context: None,
        notes: Vec::new(),
        files: Vec::new(),
        results: Value::Null,
        soft_failure: None,
        headline: String::new(),
    };
    let outcome = match cfg.command {
        Command::Validate => cmd_validate(&mut r),
        Command::Simulate => cmd_simulate(&mut r),
        Command::Periodic => cmd_periodic(&mut r),
        Command::Sweep => cmd_sweep(&mut r),
        Command::Membership => cmd_membership(&mut r),
        Command::Eigencheck => cmd_eigencheck(&mut r),
        Command::Eps0 => cmd_eps0(&mut r),
        Command::Gurtin => cmd_gurtin(&mut r),
    };
    let (status, code, failure) = match outcome {
        Ok(()) => match r.soft_failure.take() {
            None => (Status::Ok, EXIT_OK, None),
            Some(msg) => (Status::Failed, EXIT_NUMERIC, Some(msg)),
        },
        Err(Failure::Numeric(msg)) => (Status::Failed, EXIT_NUMERIC, Some(msg)),
        Err(Failure::Usage(msg)) => (Status::UsageError, EXIT_USAGE, Some(msg)),
    };
    let summary = RunSummary {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        command: cfg.command,
        status,
        exit_code: code,
        failure: failure.clone(),
        config: cfg.settings.clone(),
        grid: r.grid.map(GridEcho::from),
        context: r.context.take(),
        notes: std::mem::take(&mut r.notes),
        files: std::mem::take(&mut r.files),
        results: std::mem::take(&mut r.results),
    };
    let timing = json!({ "wall_seconds": started.elapsed().as_secs_f64() });
    if let Err(e) = write_json(&dir.join("summary.json"), &summary)
        .and_then(|_| write_json(&dir.join("timing.json"), &timing))
    {
        eprintln!("error: cannot write summary: {e}");
        return EXIT_NUMERIC.max(code);
    }
    match &failure {
        None => println!("{}", r.headline),
        Some(msg) => eprintln!(
            "{}: {msg}",
            if code == EXIT_USAGE {
                "usage error"
            } else {
                "failed"
            }
        ),
    }
    code
}

fn write_json(path: &Path, v: &impl Serialize) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

fn cmd_validate(r: &mut Run) -> Result<(), Failure> {
    let f = r.cfg.nonlinearity()?;
    let n = r.cfg.settings.n_samples.unwrap_or(20_001);
    let report = validate(&f, n);
    let p2 = period_two_points(&f, f.eval_domain, 1e-6)?;
    let constants = analysis_constants(&f, 0.0).ok();
    if constants.is_none() {
        r.notes
            .push("no radius A0 beyond which |f(x)| < |x| inside the evaluation domain".into());
    }
    r.headline = format!(
        "{}: {} (f'(0) = {}, kappa = {:?}, {:?})",
        f.tag(),
        if report.pass { "pass" } else { "fail" },
        report.fprime0,
        report.kappa1,
        report.kappa2
    );
    r.results = json!({
        "nonlinearity": f,
        "report": report,
        "period_two_points": p2,
        "analysis_constants": constants,
    });
    Ok(())
}

/// Initial data from `const:<v>` or `generator:tau=<t>,factor=<k>`.
fn initial_data(r: &mut Run, f: &NonlinearitySpec, g: Grid) -> Result<InitialData, Failure> {
    let spec = r
        .cfg
        .settings
        .b0
        .clone()
        .unwrap_or_else(|| "const:1".into());
    let (kind, arg) = spec.split_once(':').unwrap_or((spec.as_str(), ""));
    match kind {
        "const" => {
            let c: f64 = arg
                .parse()
                .map_err(|_| Failure::Usage(format!("b0: bad constant `{arg}`")))?;
            Ok(InitialData::constant(g, c)?)
        }
        "generator" => {
            let (mut tau, mut factor) = (None, 2.0);
            for kv in arg.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Failure::Usage(format!("b0: expected key=value, got `{kv}`")))?;
                let v: f64 = v
                    .parse()
                    .map_err(|_| Failure::Usage(format!("b0: bad number `{v}`")))?;
                match k {
                    "tau" => tau = Some(v),
                    "factor" => factor = v,
                    other => return Err(Failure::Usage(format!("b0: unknown key `{other}`"))),
                }
            }
            let ctx = context(r, f, g)?;
            let tau = tau.unwrap_or(g.eps / 2.0);
            Ok(barriers::generate_initial(
                &ctx,
                tau,
                factor,
                Some(r.cfg.seed()),
            )?)
        }
        other => Err(Failure::Usage(format!(
            "b0: unknown kind `{other}`, expected const or generator"
        ))),
    }
}

fn context(r: &mut Run, f: &NonlinearitySpec, g: Grid) -> Result<BarrierContext, Failure> {
    let mut ctx = budget(f, &g, 0.0)?;
    if let Some(a) = r.cfg.settings.alpha {
        r.notes.push(format!(
            "alpha overridden: budget {} replaced by {a}",
            ctx.alpha
        ));
        ctx.alpha = a;
    }
    r.set_context(&ctx);
    Ok(ctx)
}

fn periodic_options(cfg: &RunConfig) -> PeriodicOptions {
    PeriodicOptions {
        tol: cfg.tol(),
        max_iter: cfg.max_iter(),
        relaxation: cfg.settings.relaxation.unwrap_or(1.0),
    }
}

fn cmd_simulate(r: &mut Run) -> Result<(), Failure> {
    let f = r.cfg.nonlinearity()?;
    let s = &r.cfg.settings;
    let (eps, horizon) = (s.eps.unwrap(), s.horizon.unwrap());
    let g = r.grid(eps)?;
    let b = initial_data(r, &f, g)?;
    r.write("initial.csv", |w| b.to_trajectory().write_csv(w))?;
    let x = extend(&b, &f, horizon)?;
    r.write("trajectory.csv", |w| x.write_csv(w))?;
    let bound = analysis_constants(&f, b.sup_norm())
        .ok()
        .map(|c| json!({ "r": c.r, "within": sup_bound_check(&x, c.r), "slack": BOUND_SLACK }));
    let verdict = if horizon >= 3.0 {
        Some(classify(&x, (0.0, horizon))?)
    } else {
        r.notes
            .push("horizon below 3: no oscillation verdict".into());
        None
    };
    r.headline = format!(
        "simulated to t = {} ({} nodes), sup |x| = {}",
        x.t_end(),
        x.samples.len(),
        x.sup_norm()
    );
    r.results = json!({
        "sup_norm_initial": b.sup_norm(),
        "sup_norm": x.sup_norm(),
        "jump_at_zero": x.jump_at_zero,
        "bound": bound,
        "verdict": verdict,
    });
    Ok(())
}

fn cmd_periodic(r: &mut Run) -> Result<(), Failure> {
    let f = r.cfg.nonlinearity()?;
    let g = r.grid(r.cfg.settings.eps.unwrap())?;
    let b = initial_data(r, &f, g)?;
    match find_periodic(&b, &f, periodic_options(r.cfg))? {
        PeriodicSearch::Periodic(o) => {
            r.write("orbit.csv", |w| o.one_period.write_csv(w))?;
            r.headline = format!(
                "period {} extremes {:?} residual {:e}",
                o.period, o.extremes, o.residual
            );
            r.results = json!({
                "outcome": "periodic",
                "orbit": o.summary(),
                "z_start": o.z_start,
                "closure_defect": o.closure_defect,
                "equation_defect": o.equation_defect,
                "closure_jump": o.closure_jump,
                "distance_history": o.distance_history,
                "crossings": o.crossings(),
            });
        }
        PeriodicSearch::Equilibrium {
            iterations,
            distance_history,
        } => {
            r.results = json!({ "outcome": "equilibrium", "iterations": iterations, "distance_history": distance_history });
            r.soft_failure = Some(format!(
                "return map collapsed onto the zero equilibrium after {iterations} iterations"
            ));
        }
        PeriodicSearch::NotConverged {
            iterations,
            distance_history,
            last,
        } => {
            r.write("last_segment.csv", |w| last.to_trajectory().write_csv(w))?;
            let d = distance_history.last().copied();
            r.results = json!({ "outcome": "not-converged", "iterations": iterations, "distance_history": distance_history });
            r.soft_failure = Some(format!(
                "no convergence in {iterations} iterations (last distance {d:?})"
            ));
        }
    }
    Ok(())
}

fn cmd_sweep(r: &mut Run) -> Result<(), Failure> {
    let f = r.cfg.nonlinearity()?;
    let s = &r.cfg.settings;
    let eps_list = s.eps_list.clone().unwrap();
    let interval = s
        .interval
        .as_ref()
        .map_or(DEFAULT_INTERVAL, |v| (v[0], v[1]));
    let sw = limit::sweep(&f, &eps_list, interval, periodic_options(r.cfg))?;
    r.write("sweep.csv", |w| sw.write_csv(w))?;
    for (row, orbit) in sw.rows.iter().zip(&sw.orbits) {
        let aligned = limit::align_phase(orbit, sw.levels)?;
        r.write(&format!("orbit_eps_{}.csv", row.eps), |w| {
            aligned.trajectory.write_csv(w)
        })?;
    }
    let failed: Vec<f64> = sw
        .rows
        .iter()
        .filter(|row| !row.converged)
        .map(|row| row.eps)
        .collect();
    if !failed.is_empty() {
        r.soft_failure = Some(format!("no convergence at eps = {failed:?}"));
    }
    r.headline = format!(
        "{} rows, plateaus {} / {}",
        sw.rows.len(),
        sw.levels.lo,
        sw.levels.hi
    );
    r.results = json!({
        "levels": sw.levels,
        "interval": sw.interval,
        "rows": sw.rows,
        "sup_error_monotone": sw.sup_error_monotone(),
        "l1_error_monotone": sw.l1_error_monotone(),
    });
    Ok(())
}

/// Initial data from a `t,x` CSV on the history nodes of `g`.
pub fn read_initial_csv(path: &Path, g: Grid) -> Result<InitialData, String> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = rd.headers().map_err(|e| e.to_string())?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "x" {
        return Err(format!("{}: expected header t,x", path.display()));
    }
    let mut samples = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |j: usize| {
            rec[j]
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("row {}: bad number `{}`", i + 1, &rec[j]))
        };
        let (t, x) = (num(0)?, num(1)?);
        let want = g.time(i as i64 - g.history_intervals() as i64);
        if (t - want).abs() > 1e-9 {
            return Err(format!(
                "row {}: t = {t} is not the grid node {want}",
                i + 1
            ));
        }
        samples.push(x);
    }
    InitialData::from_samples(g, samples).map_err(|e| e.to_string())
}

fn cmd_membership(r: &mut Run) -> Result<(), Failure> {
    let s = &r.cfg.settings;
    let g = r.grid(s.eps.unwrap())?;
    let b = read_initial_csv(s.input.as_ref().unwrap(), g).map_err(Failure::Usage)?;
    let ctx = if r.cfg.has_nonlinearity() {
        let f = r.cfg.nonlinearity()?;
        context(r, &f, g)?
    } else {
        let ctx = BarrierContext::manual(g, s.alpha.unwrap(), s.r.unwrap(), 0.0)?;
        r.notes
            .push("no nonlinearity given: alpha and R taken as supplied, tau0 = 0".into());
        ctx
    };
    let rep = membership(&b, &ctx)?;
    r.headline = format!("member: {} (tau = {})", rep.member_r, rep.tau);
    r.results = serde_json::to_value(&rep).unwrap_or(Value::Null);
    Ok(())
}

fn cmd_eigencheck(r: &mut Run) -> Result<(), Failure> {
    let s = &r.cfg.settings;
    let (eps, fp) = (s.eps.unwrap(), s.fprime0.unwrap());
    let m = s.m.unwrap_or(50);
    let g = make_grid(eps, m)?;
    r.grid = Some(g);
    let res = barriers::eigencheck(eps, fp, m)?;
    let res_half = barriers::eigencheck(eps, fp, 2 * m)?;
    let lam = barriers::lambda0(fp, g.eps);
    r.headline = format!("lambda0 = {lam}, residual {res:e} (half dt: {res_half:e})");
    r.results = json!({
        "lambda0": lam,
        "residual": res,
        "residual_half_dt": res_half,
        "reduction": res / res_half,
    });
    Ok(())
}

fn cmd_eps0(r: &mut Run) -> Result<(), Failure> {
    let fp = r.cfg.settings.fprime0.unwrap();
    let e0 = barriers::eps0(fp)?;
    let residual = (barriers::lambda0(fp, e0) - 2.0).abs();
    r.headline = format!("{e0}");
    r.results = json!({ "fprime0": fp, "eps0": e0, "lambda0_residual": residual });
    Ok(())
}

fn cmd_gurtin(r: &mut Run) -> Result<(), Failure> {
    let s = &r.cfg.settings;
    let alpha = s.alpha_ricker.unwrap();
    let mu = s.mu.unwrap_or(0.0);
    let eps = s.eps.unwrap();
    let horizon = s.horizon.unwrap_or(10.0);
    let times = s
        .times
        .clone()
        .unwrap_or_else(|| vec![horizon / 2.0, horizon]);
    let cfg = GurtinConfig::new(NonlinearitySpec::ricker(alpha), mu, eps)?;
    r.notes.push(
        "kernel taken as gamma(a) exp(-mu a) = 1/eps on the window, so that it is normalized"
            .into(),
    );
    if !cfg.range_condition {
        r.notes.push(format!(
            "f(sup f) = {} <= x_star = {}: clamp placed at f(sup f)/2 = {}",
            cfg.f_of_sup, cfg.x_star, cfg.x_clamp
        ));
    }
    let kernel = gurtin::kernel_check(mu, eps)?;
    let shifted = cfg.shifted()?;
    if let Some(w) = &shifted.warning {
        log::warn!("{w}");
        r.notes.push(w.clone());
    }
    r.results = json!({ "config": cfg, "kernel_normalization": kernel, "fprime_kappa": shifted.fprime_kappa });
    let opts = DemoOptions {
        horizon,
        ..DemoOptions::default()
    };
    let opts = DemoOptions {
        periodic: PeriodicOptions {
            tol: r.cfg.tol(),
            max_iter: r.cfg.max_iter(),
            relaxation: s.relaxation.unwrap_or(opts.periodic.relaxation),
        },
        ..opts
    };
    let demo = gurtin::asymptotic_demo(&cfg, &times, opts)?;
    r.grid = Some(demo.grid);
    r.write("orbit.csv", |w| demo.orbit.one_period.write_csv(w))?;
    r.write("birth.csv", |w| demo.birth.write_csv(w))?;
    for (i, snap) in demo.snapshots.iter().enumerate() {
        r.write(&format!("density_{i}.csv"), |w| snap.write_csv(w))?;
    }
    r.headline = format!(
        "kappa = {}, period {}, min birth rate {}, B residual {:e}",
        cfg.kappa, demo.orbit.period, demo.min_birth, demo.b_residual
    );
    r.results["orbit"] = serde_json::to_value(demo.orbit.summary()).unwrap_or(Value::Null);
    r.results["eps0"] = json!(demo.eps0);
    r.results["b_residual"] = json!(demo.b_residual);
    r.results["min_birth"] = json!(demo.min_birth);
    r.results["clamp_inactive"] = json!(demo.clamp_inactive);
    r.results["snapshot_times"] = json!(times);
    Ok(())
}
