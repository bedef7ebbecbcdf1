//! Command-line driver: argument parsing, experiment configs and reports.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Status;
use crate::config::{Config, Format};

#[derive(Debug, Parser)]
#[command(name = "vcbound", version, about = "Bounds on expected suprema of VC-type empirical processes")]
pub struct Cli {
    /// TOML experiment config; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent. Summaries go to `<out>.summary.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Evaluate every bound over the configured (n, d, sigma) grid.
    Bounds,
    /// Monte Carlo dominance sweep; exits 3 when a bound is beaten.
    Simulate,
    /// Empirical VC and weak VC-major dimensions on random samples.
    Shatter,
    /// Chaining decomposition of one conditional Rademacher supremum.
    Chain,
    /// Bounds next to a Monte Carlo estimate of the expected supremum.
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::Simulate => "simulate",
            Command::Shatter => "shatter",
            Command::Chain => "chain",
            Command::Compare => "compare",
        }
    }
}

/// Config after command-line overrides.
pub fn resolve(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if cli.out.is_some() {
        cfg.out.clone_from(&cli.out);
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> anyhow::Result<Status> {
    let cfg = resolve(cli)?;
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let out = cfg.out.as_deref();
    match cli.command {
        Command::Bounds => commands::cmd_bounds(&cfg, out),
        Command::Simulate => commands::cmd_simulate(&cfg, out),
        Command::Shatter => commands::cmd_shatter(&cfg, out),
        Command::Chain => commands::cmd_chain(&cfg, out),
        Command::Compare => commands::cmd_compare(&cfg, out),
    }
}

/// Exit codes: 0 success, 1 bad input or I/O, 2 numerical failure,
/// 3 a simulated supremum beat a bound.
pub fn run(cli: Cli) -> ExitCode {
    match execute(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<vcbound::Error>(), Some(vcbound::Error::Integration { .. })));
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}
