use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use orsched_core::datagen::parse_catalog;
use orsched_core::eval::TOOL_VERSION;
use orsched_core::task::serialize_jsonl;
use orsched_core::{default_catalog, generate, GenConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{io, Status};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    num_tasks: usize,
    #[arg(long)]
    out_dir: PathBuf,
    /// JSON array of {action, object, kind, base_time} templates
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    min_subtasks: usize,
    #[arg(long, default_value_t = 7)]
    max_subtasks: usize,
    /// Relative duration jitter, in [0, 0.5)
    #[arg(long, default_value_t = 0.10)]
    perturbation: f64,
    #[arg(long, default_value_t = 2)]
    max_parallel: usize,
    /// Reuse catalog templates within a task
    #[arg(long)]
    allow_repeats: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'a str,
    config: &'a GenConfig,
    catalog: Option<String>,
    files: BTreeMap<&'a str, String>,
    content_hash: String,
}

pub const TASKS: &str = "tasks.jsonl";
pub const SOLUTIONS: &str = "solutions.jsonl";
pub const MASKS: &str = "gt_masks.jsonl";
pub const REFERENCE: &str = "reference_predictions.jsonl";
pub const MANIFEST: &str = "manifest.json";

pub fn run(args: GenerateArgs) -> Result<Status> {
    let config = GenConfig {
        seed: args.seed,
        num_tasks: args.num_tasks,
        min_subtasks: args.min_subtasks,
        max_subtasks: args.max_subtasks,
        perturbation: args.perturbation,
        max_parallel_per_task: args.max_parallel,
        allow_repeats: args.allow_repeats,
    };
    config.check()?;
    let catalog = match &args.catalog {
        Some(path) => {
            parse_catalog(&io::read(path)?).with_context(|| path.display().to_string())?
        }
        None => default_catalog(),
    };
    let data = generate(&config, &catalog)?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let outputs = [
        (TASKS, serialize_jsonl(&data.tasks)),
        (SOLUTIONS, serialize_jsonl(&data.solutions)),
        (MASKS, serialize_jsonl(&data.masks)),
        (REFERENCE, serialize_jsonl(&data.reference_predictions())),
    ];
    let mut all = Sha256::new();
    let mut files = BTreeMap::new();
    for (name, body) in &outputs {
        io::write(&args.out_dir.join(name), body)?;
        all.update(body.as_bytes());
        files.insert(*name, hex::encode(Sha256::digest(body.as_bytes())));
    }
    let manifest = Manifest {
        tool_version: TOOL_VERSION,
        config: &config,
        catalog: args.catalog.as_ref().map(|p| p.display().to_string()),
        files,
        content_hash: hex::encode(all.finalize()),
    };
    io::write(
        &args.out_dir.join(MANIFEST),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    println!(
        "wrote {} tasks to {} (content hash {})",
        data.tasks.len(),
        args.out_dir.display(),
        manifest.content_hash
    );
    Ok(Status::Ok)
}
