//! `regime`: learn cost-aware treatment regimes from observational data.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Overrides;

/// Learn interpretable, cost-effective treatment regimes as decision lists
#[derive(Parser, Debug)]
#[command(name = "regime", version, about, long_about = None)]
#[command(after_help = "PIPELINE:\n  \
    regime generate --out run --n-subjects 2000 --seed 7\n  \
    regime mine     --out run\n  \
    regime fit      --out run\n  \
    regime learn    --out run --lambda2 0.1\n  \
    regime evaluate --out run --lambda2 0.1\n\n\
    EXIT CODES:\n  0 success, 2 invalid input or configuration, 3 convergence failure or instance too large")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset, its schema and its ground truth
    Generate,
    /// Mine frequent candidate patterns
    Mine,
    /// Fit propensity and outcome models and compute doubly robust scores
    Fit,
    /// Search for the best decision list
    Learn {
        /// Candidate patterns (default: <out>/candidates.json)
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Doubly robust scores (default: <out>/scores.json)
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Report outcome, costs and objective of a decision list
    Evaluate {
        /// Regime to evaluate (default: <out>/regime.json)
        #[arg(long)]
        regime: Option<PathBuf>,
        /// Doubly robust scores (default: <out>/scores.json)
        #[arg(long)]
        scores: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.overrides.resolve()?;
    match cli.command {
        Command::Generate => commands::cmd_generate(&cfg),
        Command::Mine => commands::cmd_mine(&cfg),
        Command::Fit => commands::cmd_fit(&cfg),
        Command::Learn { candidates, scores } => commands::cmd_learn(&cfg, candidates, scores),
        Command::Evaluate { regime, scores } => commands::cmd_evaluate(&cfg, regime, scores),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<regime_core::Error>())
        .any(regime_core::Error::is_numerical_or_size);
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
