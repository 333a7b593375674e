//! `sdex`: batch front-end for SDE transition-density expansions.
//!
//! Every run reads one JSON experiment config and writes CSV/JSON artifacts
//! into the output directory, deterministically for a fixed config and seed.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CmdError;
use config::{ExperimentConfig, ModelChoice};

#[derive(Parser)]
#[command(name = "sdex", about = "SDE transition-density expansions", version)]
struct Cli {
    /// Experiment configuration (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override every seed in the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: logical cores); results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the density proxy on a grid
    Density,
    /// Benchmark the proxy against a simulated reference density
    Compare,
    /// Simulate an observation dataset
    Simulate,
    /// Maximum-likelihood fit on fully observed data
    Mle,
    /// Posterior sampling on noisily observed data
    Mcmc,
    /// Span-condition and baseline-moment diagnostics
    Check,
}

fn dispatch(cli: &Cli) -> Result<(), CmdError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CmdError::config("--config is required"))?;
    let cfg = ExperimentConfig::load(config_path)
        .map_err(CmdError::config)?
        .with_overrides(cli.seed, cli.out.clone());
    let model = cfg.build_model().map_err(CmdError::config)?;

    macro_rules! run {
        ($f:path) => {
            match &model {
                ModelChoice::Fhn(m) => $f(&cfg, m),
                ModelChoice::Langevin(m) => $f(&cfg, m),
                ModelChoice::Linear(m) => $f(&cfg, m),
            }
        };
    }

    match cli.command {
        Command::Density => run!(commands::cmd_density),
        Command::Compare => run!(commands::cmd_compare),
        Command::Simulate => run!(commands::cmd_simulate),
        Command::Mle => run!(commands::cmd_mle),
        Command::Mcmc => run!(commands::cmd_mcmc),
        Command::Check => run!(commands::cmd_check),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
