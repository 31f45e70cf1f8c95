//! Run configuration: a flat TOML document, overridden field by field by
//! command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use volterra_core::NonlinearitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Simulate,
    Periodic,
    Sweep,
    Membership,
    Eigencheck,
    Eps0,
    Gurtin,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        f.write_str(&s)
    }
}

/// Every configurable value. Field names are the TOML keys; flags use the
/// same names with dashes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// Catalog tag: atan-shifted, odd-sine-clipped, asymmetric-sine-clipped,
    /// linear:<slope>, ricker:<alpha>
    #[arg(long = "f")]
    pub f: Option<String>,
    /// Full nonlinearity table (file only), e.g. a user-piecewise spec.
    #[arg(skip)]
    pub nonlinearity: Option<NonlinearitySpec>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Barrier amplitude overriding the budget.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Invariant radius, for membership without a nonlinearity.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub relaxation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// const:<value> or generator:tau=<t>,factor=<k>
    #[arg(long)]
    pub b0: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// lo,hi
    #[arg(long, value_delimiter = ',')]
    pub interval: Option<Vec<f64>>,
    /// CSV with header t,x holding initial data on the history interval.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub fprime0: Option<f64>,
    #[arg(long)]
    pub alpha_ricker: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Snapshot times for the age density.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

pub fn read_file(path: &Path) -> Result<Settings, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_toml(&text)
}

pub fn parse_toml(text: &str) -> Result<Settings, UsageError> {
    toml::from_str(text).map_err(|e| usage(format!("config: {}", e.message())))
}

macro_rules! overlay {
    ($file:ident, $flags:ident, $($field:ident),+) => {$(
        if let Some(v) = $flags.$field {
            if let Some(old) = &$file.$field {
                if *old != v {
                    log::warn!("flag {} = {:?} overrides config value {:?}", stringify!($field), v, old);
                }
            }
            $file.$field = Some(v);
        }
    )+};
}

/// Flags win over file values; every overridden value is logged.
pub fn merge(mut file: Settings, flags: Settings) -> Settings {
    if flags.f.is_some() && file.nonlinearity.is_some() {
        log::warn!("flag f overrides the nonlinearity table of the config file");
        file.nonlinearity = None;
    }
    overlay!(
        file,
        flags,
        command,
        f,
        nonlinearity,
        eps,
        m,
        alpha,
        r,
        horizon,
        tol,
        max_iter,
        relaxation,
        seed,
        out_dir,
        b0,
        eps_list,
        interval,
        input,
        fprime0,
        alpha_ricker,
        mu,
        times,
        n_samples
    );
    file
}

/// A settings set checked for the fields its command needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub settings: Settings,
}

pub const DEFAULT_OUT_DIR: &str = "out";

impl RunConfig {
    pub fn out_dir(&self) -> PathBuf {
        self.settings
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn nonlinearity(&self) -> Result<NonlinearitySpec, UsageError> {
        match (&self.settings.f, &self.settings.nonlinearity) {
            (Some(tag), _) => tag.parse().map_err(|e| usage(format!("f: {e}"))),
            (None, Some(spec)) => {
                spec.check()
                    .map_err(|e| usage(format!("nonlinearity: {e}")))?;
                Ok(spec.clone())
            }
            (None, None) => Err(usage("missing required field `f`")),
        }
    }

    pub fn has_nonlinearity(&self) -> bool {
        self.settings.f.is_some() || self.settings.nonlinearity.is_some()
    }

    pub fn tol(&self) -> f64 {
        self.settings.tol.unwrap_or(1e-8)
    }

    pub fn max_iter(&self) -> usize {
        self.settings.max_iter.unwrap_or(500)
    }

    pub fn seed(&self) -> u64 {
        self.settings.seed.unwrap_or(0)
    }
}

fn require<T>(v: &Option<T>, name: &str) -> Result<(), UsageError> {
    match v {
        Some(_) => Ok(()),
        None => Err(usage(format!("missing required field `{name}`"))),
    }
}

/// Resolves the command and checks that every field it needs is present.
pub fn parse_config(
    command: Option<Command>,
    file: Option<&Path>,
    flags: Settings,
) -> Result<RunConfig, UsageError> {
    let base = match file {
        Some(p) => read_file(p)?,
        None => Settings::default(),
    };
    let flags = Settings {
        command: command.or(flags.command),
        ..flags
    };
    let settings = merge(base, flags);
    let command = settings
        .command
        .ok_or_else(|| usage("missing required field `command`"))?;
    let cfg = RunConfig { command, settings };
    let s = &cfg.settings;
    let need_f = || {
        if cfg.has_nonlinearity() {
            Ok(())
        } else {
            Err(usage("missing required field `f`"))
        }
    };
    match command {
        Command::Validate => need_f()?,
        Command::Simulate => {
            need_f()?;
            require(&s.eps, "eps")?;
            require(&s.horizon, "horizon")?;
        }
        Command::Periodic => {
            need_f()?;
            require(&s.eps, "eps")?;
        }
        Command::Sweep => {
            need_f()?;
            require(&s.eps_list, "eps_list")?;
        }
        Command::Membership => {
            require(&s.input, "input")?;
            require(&s.eps, "eps")?;
            if !cfg.has_nonlinearity() {
                require(&s.alpha, "alpha")?;
                require(&s.r, "r")?;
            }
        }
        Command::Eigencheck => {
            require(&s.eps, "eps")?;
            require(&s.fprime0, "fprime0")?;
        }
        Command::Eps0 => require(&s.fprime0, "fprime0")?,
        Command::Gurtin => {
            require(&s.alpha_ricker, "alpha_ricker")?;
            require(&s.eps, "eps")?;
        }
    }
    if let Some(iv) = &s.interval {
        if iv.len() != 2 {
            return Err(usage("interval takes exactly two values lo,hi"));
        }
    }
    if cfg.has_nonlinearity() {
        cfg.nonlinearity()?;
    }
    Ok(cfg)
}
