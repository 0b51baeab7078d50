//! Offline scoring of model predictions against ground-truth solutions.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    accumulate_confusion, mask_iou, rouge_l, time_efficiency, GroundingReport, MetricError,
    TypeRecognitionReport,
};
use crate::simulate::{simulate, ValidationError};
use crate::solver::{oracle_solve, SolverConfig, ORACLE_MAX_SUBTASKS};
use crate::task::{
    BadPrediction, CompositeTask, GroundTruthSolution, Minutes, PredictionRecord, TaskMasks,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction for {pred} evaluated against ground truth of {gt}")]
    TaskMismatch { gt: String, pred: String },
    #[error("solution {0} has no matching task")]
    UnknownTask(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeOutcome {
    pub te: f64,
    pub valid: bool,
    pub pred_makespan: Option<Minutes>,
    pub errors: Vec<ValidationError>,
}

/// Time efficiency of one prediction. An invalid schedule scores 0.
pub fn evaluate_te(
    task: &CompositeTask,
    gt: &GroundTruthSolution,
    pred: &PredictionRecord,
) -> Result<TeOutcome, EvalError> {
    for other in [&gt.task_id, &pred.task_id] {
        if *other != task.task_id {
            return Err(EvalError::TaskMismatch {
                gt: task.task_id.clone(),
                pred: other.clone(),
            });
        }
    }
    match simulate(task, &pred.schedule) {
        Ok(sim) => Ok(TeOutcome {
            te: time_efficiency(sim.makespan, gt.optimal_makespan, gt.worst_makespan)?,
            valid: true,
            pred_makespan: Some(sim.makespan),
            errors: Vec::new(),
        }),
        Err(invalid) => Ok(TeOutcome {
            te: 0.0,
            valid: false,
            pred_makespan: None,
            errors: invalid.errors,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Ok,
    /// Parsed, but the schedule breaks a validation rule.
    Invalid,
    /// No prediction for this task.
    Missing,
    /// The prediction line could not be parsed.
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: String,
    pub status: TaskStatus,
    pub te: f64,
    pub valid: bool,
    pub pred_makespan: Option<Minutes>,
    pub optimal_makespan: Minutes,
    pub worst_makespan: Minutes,
    /// Exhaustive-search optimum, for tasks small enough to search.
    pub oracle_makespan: Option<Minutes>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub validation_errors: Vec<ValidationError>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub flags: Vec<String>,
    pub type_report: Option<TypeRecognitionReport>,
    pub grounding_report: Option<GroundingReport>,
    pub rouge_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub num_tasks: usize,
    pub num_valid: usize,
    pub num_invalid: usize,
    pub num_missing: usize,
    pub num_malformed: usize,
    pub mean_te: f64,
    pub type_accuracy: Option<f64>,
    pub p_f1: Option<f64>,
    pub np_f1: Option<f64>,
    pub acc_at_25: Option<f64>,
    pub acc_at_50: Option<f64>,
    pub miou: Option<f64>,
    pub mean_rouge_l: Option<f64>,
    /// Mean of ROUGE-L, TE and Acc@0.25 on a 0-100 scale; absent parts count as 0.
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub solver_config: SolverConfig,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub overall_components: Vec<String>,
    pub unknown_predictions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_task: Vec<TaskReport>,
    pub aggregate: Aggregate,
    pub meta: Meta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub solver_config: SolverConfig,
    pub seed: Option<u64>,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            solver_config: SolverConfig::default(),
            seed: None,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub warnings: Vec<String>,
}

enum Entry<'a> {
    Parsed(&'a PredictionRecord),
    Bad(&'a BadPrediction),
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn score_task(
    task: &CompositeTask,
    gt: &GroundTruthSolution,
    entry: Option<&Entry<'_>>,
    masks: Option<&TaskMasks>,
    config: &SolverConfig,
) -> Result<TaskReport, EvalError> {
    let oracle_makespan = (task.len() <= ORACLE_MAX_SUBTASKS)
        .then(|| oracle_solve(task, config).ok().map(|(_, m)| m))
        .flatten();
    let zero_grounding = || masks.map(|_| GroundingReport::from_ious(vec![0.0; gt.schedule.len()]));
    let mut report = TaskReport {
        task_id: task.task_id.clone(),
        status: TaskStatus::Missing,
        te: 0.0,
        valid: false,
        pred_makespan: None,
        optimal_makespan: gt.optimal_makespan,
        worst_makespan: gt.worst_makespan,
        oracle_makespan,
        validation_errors: Vec::new(),
        flags: Vec::new(),
        type_report: None,
        grounding_report: zero_grounding(),
        rouge_l: Some(0.0),
    };

    let pred = match entry {
        None => {
            report.flags.push("missing".into());
            return Ok(report);
        }
        Some(Entry::Bad(bad)) => {
            report.status = TaskStatus::Malformed;
            report
                .flags
                .push(format!("malformed line {}: {}", bad.line, bad.message));
            return Ok(report);
        }
        Some(Entry::Parsed(p)) => *p,
    };

    let te = evaluate_te(task, gt, pred)?;
    report.status = if te.valid {
        TaskStatus::Ok
    } else {
        TaskStatus::Invalid
    };
    report.te = te.te;
    report.valid = te.valid;
    report.pred_makespan = te.pred_makespan;
    report.validation_errors = te.errors;
    if !te.valid {
        report.flags.push("invalid schedule".into());
    }

    if let Some(types) = &pred.predicted_types {
        let mut confusion = [[0; 2]; 2];
        match accumulate_confusion(&mut confusion, &task.kinds(), types) {
            Ok(()) => report.type_report = Some(TypeRecognitionReport::from_confusion(confusion)),
            Err(_) => report.flags.push(format!(
                "predicted_types has {} entries for {} subtasks",
                types.len(),
                task.len()
            )),
        }
    }

    if let Some(texts) = &pred.step_texts {
        report.rouge_l = Some(rouge_l(&texts.join(" "), &gt.step_texts.join(" ")));
    }

    if let Some(masks) = masks {
        report.grounding_report = match &pred.predicted_masks {
            Some(pm) if pm.len() == pred.schedule.len() => Some(GroundingReport::from_ious(
                pred.schedule
                    .events
                    .iter()
                    .zip(pm)
                    .map(|(e, m)| masks.masks.get(e.subtask()).map_or(0.0, |g| mask_iou(m, g)))
                    .collect(),
            )),
            Some(pm) => {
                report.flags.push(format!(
                    "{} predicted masks for {} steps",
                    pm.len(),
                    pred.schedule.len()
                ));
                zero_grounding()
            }
            None => zero_grounding(),
        };
    }
    Ok(report)
}

/// Scores every ground-truth task. Results come back in solution order
/// whatever the worker count.
pub fn evaluate(
    tasks: &[CompositeTask],
    solutions: &[GroundTruthSolution],
    predictions: &[Result<PredictionRecord, BadPrediction>],
    gt_masks: Option<&[TaskMasks]>,
    options: &EvalOptions,
) -> Result<EvalOutcome, EvalError> {
    let task_by_id: HashMap<&str, &CompositeTask> =
        tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    let masks_by_id: Option<HashMap<&str, &TaskMasks>> =
        gt_masks.map(|m| m.iter().map(|x| (x.task_id.as_str(), x)).collect());
    let known: HashMap<&str, ()> = solutions.iter().map(|s| (s.task_id.as_str(), ())).collect();

    let mut warnings = Vec::new();
    let mut unknown = Vec::new();
    let mut entries: HashMap<&str, Entry<'_>> = HashMap::new();
    for p in predictions {
        let (id, entry, line) = match p {
            Ok(rec) => (Some(rec.task_id.as_str()), Entry::Parsed(rec), None),
            Err(bad) => (bad.task_id.as_deref(), Entry::Bad(bad), Some(bad.line)),
        };
        let Some(id) = id else {
            warnings.push(format!(
                "line {}: unparseable prediction without task_id skipped",
                line.unwrap_or(0)
            ));
            continue;
        };
        if !known.contains_key(id) {
            warnings.push(format!("prediction for unknown task {id} skipped"));
            unknown.push(id.to_string());
            continue;
        }
        if entries.contains_key(id) {
            warnings.push(format!(
                "duplicate prediction for task {id}; keeping the first"
            ));
            continue;
        }
        entries.insert(id, entry);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let per_task: Vec<TaskReport> = pool.install(|| {
        solutions
            .par_iter()
            .map(|gt| {
                let task = task_by_id
                    .get(gt.task_id.as_str())
                    .ok_or_else(|| EvalError::UnknownTask(gt.task_id.clone()))?;
                let masks = masks_by_id
                    .as_ref()
                    .and_then(|m| m.get(gt.task_id.as_str()).copied());
                if masks_by_id.is_some() && masks.is_none() {
                    return Err(EvalError::UnknownTask(format!(
                        "{} (no ground-truth masks)",
                        gt.task_id
                    )));
                }
                score_task(
                    task,
                    gt,
                    entries.get(gt.task_id.as_str()),
                    masks,
                    &options.solver_config,
                )
            })
            .collect::<Result<_, _>>()
    })?;

    let aggregate = aggregate(&per_task);
    Ok(EvalOutcome {
        report: EvalReport {
            per_task,
            aggregate,
            meta: Meta {
                solver_config: options.solver_config,
                tool_version: TOOL_VERSION.to_string(),
                seed: options.seed,
                overall_components: vec!["rouge_l".into(), "te".into(), "acc_at_25".into()],
                unknown_predictions: unknown,
            },
        },
        warnings,
    })
}

fn aggregate(per_task: &[TaskReport]) -> Aggregate {
    let count = |s: TaskStatus| per_task.iter().filter(|t| t.status == s).count();

    // Type recognition is pooled over all subtasks with a prediction.
    let mut confusion = [[0u64; 2]; 2];
    let mut any_types = false;
    for r in per_task.iter().filter_map(|t| t.type_report.as_ref()) {
        any_types = true;
        for (row, src) in confusion.iter_mut().zip(r.confusion) {
            for (c, v) in row.iter_mut().zip(src) {
                *c += v;
            }
        }
    }
    let types = any_types.then(|| TypeRecognitionReport::from_confusion(confusion));

    let grounding = || per_task.iter().filter_map(|t| t.grounding_report.as_ref());
    let mean_te = mean(per_task.iter().map(|t| t.te)).unwrap_or(0.0);
    let acc_at_25 = mean(grounding().map(|g| g.acc_at_25));
    let mean_rouge_l = mean(per_task.iter().filter_map(|t| t.rouge_l));
    let overall =
        (100.0 * mean_rouge_l.unwrap_or(0.0) + mean_te + 100.0 * acc_at_25.unwrap_or(0.0)) / 3.0;

    Aggregate {
        num_tasks: per_task.len(),
        num_valid: per_task.iter().filter(|t| t.valid).count(),
        num_invalid: count(TaskStatus::Invalid),
        num_missing: count(TaskStatus::Missing),
        num_malformed: count(TaskStatus::Malformed),
        mean_te,
        type_accuracy: types.as_ref().map(|t| t.accuracy),
        p_f1: types.as_ref().map(|t| t.parallelizable.f1),
        np_f1: types.as_ref().map(|t| t.non_parallelizable.f1),
        acc_at_25,
        acc_at_50: mean(grounding().map(|g| g.acc_at_50)),
        miou: mean(grounding().map(|g| g.miou)),
        mean_rouge_l,
        overall,
    }
}
