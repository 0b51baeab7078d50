use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use orsched_core::task::parse_jsonl;
use orsched_core::{
    simulate, validate_schedule, Event, Schedule, SimulationResult, ValidationError,
};
use serde::{Deserialize, Serialize};

use crate::{io, Status};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    tasks: PathBuf,
    /// Any JSON-lines file whose records carry `task_id` and `events`
    /// (solutions or predictions)
    #[arg(long)]
    schedule_file: PathBuf,
    #[arg(long)]
    task_id: String,
    /// Print the result as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Deserialize)]
struct ScheduleRecord {
    task_id: String,
    events: Schedule,
}

#[derive(Serialize)]
struct JsonOut<'a> {
    task_id: &'a str,
    valid: bool,
    errors: &'a [ValidationError],
    #[serde(flatten)]
    result: Option<&'a SimulationResult>,
}

pub fn run(args: SimulateArgs) -> Result<Status> {
    let tasks = io::tasks(&args.tasks)?;
    let Some(task) = tasks.iter().find(|t| t.task_id == args.task_id) else {
        bail!(
            "task {} not found in {}",
            args.task_id,
            args.tasks.display()
        );
    };
    let records: Vec<ScheduleRecord> = io::parsed(
        &args.schedule_file,
        parse_jsonl(&io::read(&args.schedule_file)?),
    )?;
    let Some(record) = records.iter().find(|r| r.task_id == args.task_id) else {
        bail!(
            "no schedule for task {} in {}",
            args.task_id,
            args.schedule_file.display()
        );
    };

    let errors = validate_schedule(task, &record.events);
    let result = if errors.is_empty() {
        Some(simulate(task, &record.events)?)
    } else {
        None
    };

    if args.json {
        let out = JsonOut {
            task_id: &task.task_id,
            valid: errors.is_empty(),
            errors: &errors,
            result: result.as_ref(),
        };
        println!("{}", serde_json::to_string_pretty(&out)?);
    }

    let Some(result) = result else {
        eprintln!("task {}: invalid schedule", task.task_id);
        for e in &errors {
            eprintln!("  {e}");
        }
        return Ok(Status::Invalid);
    };
    if args.json {
        return Ok(Status::Ok);
    }

    println!("task {}: valid", task.task_id);
    println!("makespan: {} minutes", result.makespan);
    let width = task
        .subtasks
        .iter()
        .map(|s| s.description.len())
        .max()
        .unwrap_or(0)
        .max("subtask".len());
    println!(
        "{:>4}  {:<10}  {:<width$}  {:>6}  {:>6}",
        "step", "event", "subtask", "start", "end"
    );
    for (k, entry) in result.timeline.iter().enumerate() {
        let sub = &task.subtasks[entry.event.subtask()];
        let note = match entry.event {
            Event::Start(_) => "  (device)",
            _ => "",
        };
        println!(
            "{:>4}  {:<10}  {:<width$}  {:>6}  {:>6}{note}",
            k + 1,
            entry.event.to_string(),
            sub.description,
            entry.start,
            entry.end
        );
    }
    for (&(id, wait), &(_, late)) in result.waits.iter().zip(&result.overruns) {
        let name = &task.subtasks[id].target_object;
        if wait > 0 {
            println!("waited {wait} minutes for the {name}");
        }
        if late > 0 {
            println!("rechecked the {name} {late} minutes after it finished");
        }
    }
    Ok(Status::Ok)
}
