// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Kind};
use error::CliError;

/// Batch experiments for the parabolic double-phase equation.
#[derive(Debug, Parser)]
#[command(name = "dplab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory.
    #[arg(long, global = true, env = "DPLAB_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write results.csv, report.txt and plot.gp.
    Run { config: PathBuf },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// Show the experiment kinds.
    List,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::List => {
            for k in Kind::ALL {
                println!("{:<15} {}", k.name(), k.summary());
            }
            Ok(0)
        }
        Command::Validate { config } => {
            let cfg = load(&config, cli.seed)?;
            println!("ok: {} ({})", cfg.name, cfg.kind);
            Ok(0)
        }
        Command::Run { config } => {
            let cfg = load(&config, cli.seed)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from("dplab-out")).join(&cfg.name);
            let outcome = experiments::run(&cfg)?;
            outcome.write(&dir, &cfg.name, cfg.kind.name())?;
            print!("{}", outcome.report(&cfg.name, cfg.kind.name()));
            println!("wrote {}", dir.display());
            Ok(if outcome.passed() { 0 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("dplab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
