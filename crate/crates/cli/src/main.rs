//! `orsched`: generate, solve, simulate and evaluate composite-task
//! scheduling benchmarks.
//!
//! Exit codes: 0 success, 1 I/O or usage error, 2 schedule validation failure.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use orsched_core::{OverlapPolicy, SolverConfig};

mod evaluate;
mod generate;
mod io;
mod simulate;
mod solve;

#[derive(Parser)]
#[command(
    name = "orsched",
    version,
    about = "Composite-task scheduling benchmark tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark with ground-truth schedules
    Generate(generate::GenerateArgs),
    /// Solve every task in a task file
    Solve(solve::SolveArgs),
    /// Validate and simulate one schedule
    Simulate(simulate::SimulateArgs),
    /// Score predictions against ground truth
    Evaluate(evaluate::EvaluateArgs),
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum Overlap {
    #[default]
    Disallowed,
    Allowed,
}

impl From<Overlap> for SolverConfig {
    fn from(o: Overlap) -> Self {
        SolverConfig::with_overlap(match o {
            Overlap::Disallowed => OverlapPolicy::Disallowed,
            Overlap::Allowed => OverlapPolicy::Allowed,
        })
    }
}

#[derive(Args, Clone, Debug)]
pub struct SolverArgs {
    /// Whether parallelizable windows may overlap
    #[arg(long, value_enum, default_value_t = Overlap::Disallowed)]
    pub overlap: Overlap,

    /// Worker threads (0 = all cores)
    #[arg(long, env = "ORSCHED_JOBS", default_value_t = 1)]
    pub jobs: usize,
}

/// What a subcommand run amounted to, beyond I/O errors.
pub enum Status {
    Ok,
    Invalid,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate::run(a),
        Command::Solve(a) => solve::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Evaluate(a) => evaluate::run(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Invalid) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
