use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use volterra_cli::{parse_config, run, Command, Settings, EXIT_USAGE};

/// Distributed-delay feedback laboratory.
#[derive(Parser)]
#[command(name = "volterra", version, allow_negative_numbers = true)]
struct Cli {
    command: Option<Command>,
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match parse_config(cli.command, cli.config.as_deref(), cli.settings) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("usage error: {e}");
            EXIT_USAGE
        }
    };
    ExitCode::from(code as u8)
}
