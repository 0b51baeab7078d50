//! Domain types for composite tasks, schedules, ground truth and predictions,
//! plus the JSON-lines readers and writers used by every file the tools touch.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a subtask inside its composite task (`0..n`).
pub type SubtaskId = usize;

/// Duration in whole minutes.
pub type Minutes = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    /// Needs only to be started and rechecked; the device runs unattended.
    #[serde(rename = "P")]
    Parallelizable,
    /// Occupies the agent for its full duration.
    #[serde(rename = "NP")]
    NonParallelizable,
}

impl Kind {
    pub fn is_parallelizable(self) -> bool {
        matches!(self, Kind::Parallelizable)
    }

    pub fn short(self) -> &'static str {
        match self {
            Kind::Parallelizable => "P",
            Kind::NonParallelizable => "NP",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    pub id: SubtaskId,
    pub description: String,
    pub kind: Kind,
    pub expected_time: Minutes,
    pub target_object: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeTask {
    pub task_id: String,
    pub scene_id: String,
    pub subtasks: Vec<Subtask>,
}

impl CompositeTask {
    /// Builds a task from `(kind, minutes)` pairs with generated labels.
    /// Mostly useful in tests and benchmarks.
    pub fn from_durations(task_id: impl Into<String>, shape: &[(Kind, Minutes)]) -> Self {
        let subtasks = shape
            .iter()
            .enumerate()
            .map(|(id, &(kind, expected_time))| Subtask {
                id,
                description: format!("handle the object{id}"),
                kind,
                expected_time,
                target_object: format!("object{id}"),
            })
            .collect();
        CompositeTask {
            task_id: task_id.into(),
            scene_id: "scene".to_string(),
            subtasks,
        }
    }

    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    pub fn subtask(&self, id: SubtaskId) -> Option<&Subtask> {
        self.subtasks.get(id)
    }

    pub fn kinds(&self) -> Vec<Kind> {
        self.subtasks.iter().map(|s| s.kind).collect()
    }

    pub fn parallelizable(&self) -> impl Iterator<Item = &Subtask> {
        self.subtasks.iter().filter(|s| s.kind.is_parallelizable())
    }

    pub fn non_parallelizable(&self) -> impl Iterator<Item = &Subtask> {
        self.subtasks.iter().filter(|s| !s.kind.is_parallelizable())
    }

    /// Checks the structural invariants: positive durations and ids exactly `0..n`
    /// in order.
    pub fn check(&self) -> Result<(), String> {
        let mut seen = vec![false; self.subtasks.len()];
        for s in &self.subtasks {
            if s.expected_time < 1 {
                return Err(format!("subtask {}: expected_time must be ≥ 1", s.id));
            }
            match seen.get_mut(s.id) {
                Some(slot) if *slot => {
                    return Err(format!(
                        "duplicate subtask id {} in task {}",
                        s.id, self.task_id
                    ))
                }
                Some(slot) => *slot = true,
                None => {
                    return Err(format!(
                        "subtask id {} out of range 0..{} in task {}",
                        s.id,
                        self.subtasks.len(),
                        self.task_id
                    ))
                }
            }
        }
        if self.subtasks.iter().enumerate().any(|(i, s)| s.id != i) {
            return Err(format!(
                "subtask ids of task {} must be listed in order 0..n-1",
                self.task_id
            ));
        }
        Ok(())
    }
}

/// One step of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "RawEvent", into = "RawEvent")]
pub enum Event {
    Execute(SubtaskId),
    Start(SubtaskId),
    Recheck(SubtaskId),
}

impl Event {
    pub fn subtask(self) -> SubtaskId {
        match self {
            Event::Execute(id) | Event::Start(id) | Event::Recheck(id) => id,
        }
    }

    pub fn verb(self) -> &'static str {
        match self {
            Event::Execute(_) => "execute",
            Event::Start(_) => "start",
            Event::Recheck(_) => "recheck",
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.verb(), self.subtask())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum EventTag {
    Execute,
    Start,
    Recheck,
}

#[derive(Serialize, Deserialize)]
struct RawEvent(EventTag, SubtaskId);

impl From<RawEvent> for Event {
    fn from(RawEvent(tag, id): RawEvent) -> Self {
        match tag {
            EventTag::Execute => Event::Execute(id),
            EventTag::Start => Event::Start(id),
            EventTag::Recheck => Event::Recheck(id),
        }
    }
}

impl From<Event> for RawEvent {
    fn from(e: Event) -> Self {
        match e {
            Event::Execute(id) => RawEvent(EventTag::Execute, id),
            Event::Start(id) => RawEvent(EventTag::Start, id),
            Event::Recheck(id) => RawEvent(EventTag::Recheck, id),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub events: Vec<Event>,
}

impl Schedule {
    pub fn new(events: Vec<Event>) -> Self {
        Schedule { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Executes every non-parallelizable subtask, then starts and immediately
    /// rechecks each parallelizable one. Its makespan is the sum of all durations.
    pub fn sequential(task: &CompositeTask) -> Self {
        let mut events: Vec<Event> = task
            .non_parallelizable()
            .map(|s| Event::Execute(s.id))
            .collect();
        for p in task.parallelizable() {
            events.push(Event::Start(p.id));
            events.push(Event::Recheck(p.id));
        }
        Schedule { events }
    }
}

impl FromIterator<Event> for Schedule {
    fn from_iter<I: IntoIterator<Item = Event>>(iter: I) -> Self {
        Schedule {
            events: iter.into_iter().collect(),
        }
    }
}

/// Set of point indices into a scene point cloud.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointMask(pub BTreeSet<u32>);

impl PointMask {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<u32> for PointMask {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        PointMask(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthSolution {
    pub task_id: String,
    #[serde(rename = "events")]
    pub schedule: Schedule,
    pub optimal_makespan: Minutes,
    pub worst_makespan: Minutes,
    pub step_texts: Vec<String>,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub task_id: String,
    #[serde(default)]
    pub predicted_types: Option<Vec<Kind>>,
    #[serde(rename = "events")]
    pub schedule: Schedule,
    #[serde(default)]
    pub step_texts: Option<Vec<String>>,
    #[serde(default)]
    pub predicted_masks: Option<Vec<PointMask>>,
}

/// Ground-truth object masks of one task, indexed by subtask id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskMasks {
    pub task_id: String,
    pub masks: Vec<PointMask>,
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("input is not valid UTF-8: {0}")]
    Utf8(#[from] std::str::Utf8Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl FormatError {
    pub fn line(&self) -> Option<usize> {
        match self {
            FormatError::Utf8(_) => None,
            FormatError::Malformed { line, .. } | FormatError::Invalid { line, .. } => Some(*line),
        }
    }
}

/// Non-blank lines with their 1-based line numbers.
fn records(bytes: &[u8]) -> Result<impl Iterator<Item = (usize, &str)>, FormatError> {
    let text = std::str::from_utf8(bytes)?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty()))
}

fn parse_record<T: DeserializeOwned>(line: usize, text: &str) -> Result<T, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Malformed {
        line,
        message: e.to_string(),
    })
}

/// Parses every record of a JSON-lines file. Blank lines are ignored.
pub fn parse_jsonl<T: DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>, FormatError> {
    records(bytes)?
        .map(|(line, text)| parse_record(line, text))
        .collect()
}

/// Serializes records one per line, each terminated by `\n`.
pub fn serialize_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        // Plain data types only; serialization cannot fail.
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    out
}

pub fn parse_task_file(bytes: &[u8]) -> Result<Vec<CompositeTask>, FormatError> {
    records(bytes)?
        .map(|(line, text)| {
            let task: CompositeTask = parse_record(line, text)?;
            task.check()
                .map_err(|message| FormatError::Invalid { line, message })?;
            Ok(task)
        })
        .collect()
}

pub fn serialize_task_file(tasks: &[CompositeTask]) -> String {
    serialize_jsonl(tasks)
}

pub fn parse_solution_file(bytes: &[u8]) -> Result<Vec<GroundTruthSolution>, FormatError> {
    records(bytes)?
        .map(|(line, text)| {
            let sol: GroundTruthSolution = parse_record(line, text)?;
            if sol.optimal_makespan > sol.worst_makespan {
                return Err(FormatError::Invalid {
                    line,
                    message: format!(
                        "task {}: optimal_makespan {} exceeds worst_makespan {}",
                        sol.task_id, sol.optimal_makespan, sol.worst_makespan
                    ),
                });
            }
            Ok(sol)
        })
        .collect()
}

pub fn parse_prediction_file(bytes: &[u8]) -> Result<Vec<PredictionRecord>, FormatError> {
    parse_jsonl(bytes)
}

/// A prediction line that could not be parsed, with its task id when one
/// could still be recovered from the raw JSON.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadPrediction {
    pub line: usize,
    pub task_id: Option<String>,
    pub message: String,
}

/// Like [`parse_prediction_file`] but keeps going past malformed lines so an
/// evaluation can score them as invalid instead of aborting.
pub fn parse_prediction_file_lenient(
    bytes: &[u8],
) -> Result<Vec<Result<PredictionRecord, BadPrediction>>, FormatError> {
    Ok(records(bytes)?
        .map(|(line, text)| {
            serde_json::from_str::<PredictionRecord>(text).map_err(|e| {
                let task_id = serde_json::from_str::<serde_json::Value>(text)
                    .ok()
                    .and_then(|v| v.get("task_id").and_then(|t| t.as_str()).map(str::to_owned));
                BadPrediction {
                    line,
                    task_id,
                    message: e.to_string(),
                }
            })
        })
        .collect())
}
