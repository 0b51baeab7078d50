use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use orsched_core::eval::{evaluate, EvalOptions};
use orsched_core::task::{
    parse_jsonl, parse_prediction_file_lenient, parse_solution_file, TaskMasks,
};
use orsched_core::SolverConfig;

use crate::generate::MANIFEST;
use crate::{io, SolverArgs, Status};

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    solutions: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// Report JSON destination
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth object masks (enables grounding metrics)
    #[arg(long)]
    gt_masks: Option<PathBuf>,
    /// Seed recorded in the report; defaults to the manifest next to the solutions
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    solver: SolverArgs,
}

fn manifest_seed(solutions: &Path) -> Option<u64> {
    let path = solutions.parent()?.join(MANIFEST);
    let value: serde_json::Value = serde_json::from_slice(&std::fs::read(path).ok()?).ok()?;
    value.get("config")?.get("seed")?.as_u64()
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", 100.0 * x))
}

pub fn run(args: EvaluateArgs) -> Result<Status> {
    let tasks = io::tasks(&args.tasks)?;
    let solutions = io::parsed(
        &args.solutions,
        parse_solution_file(&io::read(&args.solutions)?),
    )?;
    let predictions = io::parsed(
        &args.predictions,
        parse_prediction_file_lenient(&io::read(&args.predictions)?),
    )?;
    let masks: Option<Vec<TaskMasks>> = match &args.gt_masks {
        Some(p) => Some(io::parsed(p, parse_jsonl(&io::read(p)?))?),
        None => None,
    };

    let options = EvalOptions {
        solver_config: SolverConfig::from(args.solver.overlap),
        seed: args.seed.or_else(|| manifest_seed(&args.solutions)),
        jobs: args.solver.jobs,
    };
    let outcome = evaluate(&tasks, &solutions, &predictions, masks.as_deref(), &options)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let report = &outcome.report;
    io::write(&args.out, serde_json::to_string_pretty(report)? + "\n")?;

    let a = &report.aggregate;
    println!(
        "tasks {}  valid {}  invalid {}  missing {}  malformed {}",
        a.num_tasks, a.num_valid, a.num_invalid, a.num_missing, a.num_malformed
    );
    println!("{:<14} {:>8}", "metric", "value");
    let rows = [
        ("TE", format!("{:.2}", a.mean_te)),
        ("type acc", pct(a.type_accuracy)),
        ("P F1", pct(a.p_f1)),
        ("NP F1", pct(a.np_f1)),
        ("Acc@0.25", pct(a.acc_at_25)),
        ("Acc@0.50", pct(a.acc_at_50)),
        ("mIoU", pct(a.miou)),
        ("ROUGE-L", pct(a.mean_rouge_l)),
        ("Overall", format!("{:.2}", a.overall)),
    ];
    for (name, value) in rows {
        println!("{name:<14} {value:>8}");
    }
    println!("report -> {}", args.out.display());
    Ok(Status::Ok)
}
