//! `teamdm`: simulate team sessions, fit model parameters, evaluate and
//! compare models, and check the build against known values.

mod cmd;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use teamdm::{LossKind, ModelKind, RewardScheme, Task};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "teamdm",
    version,
    about = "Human-AI team decision models: simulate, fit, evaluate"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for simulation and for the team split used to learn `w`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Reward scheme as c1,c2,c3.
    #[arg(long, global = true, default_value = "4,1,1", value_parser = parse_scheme)]
    pub scheme: RewardScheme,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic session logs, one JSON file per team.
    Simulate(cmd::simulate::SimulateArgs),
    /// Fit per-team prospect-theory parameters, or the CENT trust weight `w`.
    Fit(cmd::fit::FitArgs),
    /// Score models on session logs and compare them.
    Evaluate(cmd::evaluate::EvaluateArgs),
    /// Check worked examples and numerical spot checks.
    Selftest,
}

fn parse_scheme(s: &str) -> Result<RewardScheme, String> {
    s.parse().map_err(|e: teamdm::Error| e.to_string())
}

pub fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: teamdm::Error| e.to_string())
}

pub fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse().map_err(|e: teamdm::Error| e.to_string())
}

pub fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: teamdm::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd::simulate::run(&cli.common, &args),
        Command::Fit(args) => cmd::fit::run(&cli.common, &args),
        Command::Evaluate(args) => cmd::evaluate::run(&cli.common, &args),
        Command::Selftest => cmd::selftest::run(&cli.common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let label = match &e {
                CliError::Check(_) => "check failed",
                CliError::Usage(_) => "error",
                CliError::Io(_) => "i/o error",
            };
            eprintln!("teamdm: {label}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
