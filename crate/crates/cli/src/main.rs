mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use commands::{Command, Run};
use config::Profile;

/// Closed-form transient responses of weakly nonlinear oscillators.
#[derive(Parser)]
#[command(name = "poleres", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `desk` reduces the order-3 grid and basis.
    #[arg(long, global = true, value_enum, default_value_t = Profile::Paper)]
    profile: Profile,
}

fn run(cli: Cli) -> Result<bool> {
    let path = cli.config.context("--config is required")?;
    let loaded = config::load(&path)?;
    let mut run = Run::new(loaded, &path, cli.out, cli.profile, cli.seed, cli.command)?;
    run.execute(cli.command)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
