use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, Result};
use clap::Args;
use orsched_core::datagen::solve_to_ground_truth;
use orsched_core::task::serialize_jsonl;
use orsched_core::{solve, CompositeTask, SolverConfig};
use rayon::prelude::*;

use crate::{io, SolverArgs, Status};

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Solves timed per subtask count
    #[arg(long, default_value_t = 100)]
    timing_solves: usize,
}

/// Median single-solve time per subtask count, cycling through the tasks of
/// each size until `solves` runs have been timed.
fn timing(
    tasks: &[CompositeTask],
    config: &SolverConfig,
    solves: usize,
) -> Vec<(usize, usize, f64)> {
    let mut by_size: BTreeMap<usize, Vec<&CompositeTask>> = BTreeMap::new();
    for t in tasks {
        by_size.entry(t.len()).or_default().push(t);
    }
    by_size
        .into_iter()
        .map(|(n, group)| {
            let runs = solves.max(group.len()).max(1);
            let mut ms: Vec<f64> = (0..runs)
                .map(|i| {
                    let t = group[i % group.len()];
                    let start = Instant::now();
                    std::hint::black_box(solve(std::hint::black_box(t), config));
                    start.elapsed().as_secs_f64() * 1e3
                })
                .collect();
            ms.sort_by(f64::total_cmp);
            (n, group.len(), ms[ms.len() / 2])
        })
        .collect()
}

pub fn run(args: SolveArgs) -> Result<Status> {
    let tasks = io::tasks(&args.tasks)?;
    let config = SolverConfig::from(args.solver.overlap);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.solver.jobs)
        .build()
        .map_err(|e| anyhow!("cannot start workers: {e}"))?;
    let solutions = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| solve_to_ground_truth(t, &config))
            .collect::<Result<Vec<_>, _>>()
    })?;
    io::write(&args.out, serialize_jsonl(&solutions))?;

    let no_savings = solutions
        .iter()
        .filter(|s| s.optimal_makespan == s.worst_makespan)
        .count();
    println!(
        "solved {} tasks -> {} ({} without available savings)",
        solutions.len(),
        args.out.display(),
        no_savings
    );
    println!("{:>8} {:>8} {:>12}", "subtasks", "tasks", "median_ms");
    for (n, count, median) in timing(&tasks, &config, args.timing_solves) {
        println!("{n:>8} {count:>8} {median:>12.4}");
    }
    Ok(Status::Ok)
}
