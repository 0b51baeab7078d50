//! Makespan-minimizing schedules.
//!
//! A parallelizable subtask opens a waiting window of `T_P` minutes. Work the
//! agent does inside the window must be finished by the time the device
//! completes, so filling the window is a 0-1 knapsack over the
//! non-parallelizable durations (weights and values are both the durations).
//! With one parallelizable subtask the result is
//! `S_out + [start P] + S_in + [recheck P]` with `S_in` the knapsack choice.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulate::makespan;
use crate::task::{CompositeTask, Event, Minutes, Schedule, Subtask, SubtaskId};

/// Whether two parallelizable windows may be open at the same time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapPolicy {
    #[default]
    Disallowed,
    Allowed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    LowestIdFirst,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SolverConfig {
    pub overlap_policy: OverlapPolicy,
    pub tie_break: TieBreak,
}

impl SolverConfig {
    pub fn with_overlap(overlap_policy: OverlapPolicy) -> Self {
        SolverConfig {
            overlap_policy,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    /// Chosen ids, ascending.
    pub ids: Vec<SubtaskId>,
    pub total: Minutes,
}

/// Subset of `items` whose weight sum is as large as possible without
/// exceeding `capacity`. Among all maximal subsets the one whose ascending id
/// list is lexicographically smallest is returned.
pub fn knapsack_select(capacity: Minutes, items: &[(SubtaskId, Minutes)]) -> Selection {
    let mut items = items.to_vec();
    items.sort_unstable_by_key(|&(id, _)| id);
    let cap = capacity as usize;
    let width = cap + 1;
    let m = items.len();

    // reach[k * width + s]: some subset of items[k..] sums to exactly s.
    let mut reach = vec![false; (m + 1) * width];
    reach[m * width] = true;
    for k in (0..m).rev() {
        let w = items[k].1 as usize;
        let (head, tail) = reach.split_at_mut((k + 1) * width);
        let row = &mut head[k * width..];
        let next = &tail[..width];
        for s in 0..width {
            row[s] = next[s] || (s >= w && next[s - w]);
        }
    }

    let total = (0..width).rev().find(|&s| reach[s]).unwrap_or(0);

    // Taking the lowest remaining id whenever the target stays reachable
    // yields the lexicographically smallest id list.
    let mut ids = Vec::new();
    let mut rem = total;
    for (k, &(id, w)) in items.iter().enumerate() {
        let w = w as usize;
        if w <= rem && reach[(k + 1) * width + rem - w] {
            ids.push(id);
            rem -= w;
        }
    }
    debug_assert_eq!(rem, 0);

    Selection {
        ids,
        total: total as Minutes,
    }
}

/// Sum of all durations: every subtask run back to back.
pub fn worst_makespan(task: &CompositeTask) -> Minutes {
    task.subtasks.iter().map(|s| s.expected_time).sum()
}

/// A parallelizable subtask together with the subtasks executed while it runs.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Window {
    device: SubtaskId,
    inside: Vec<SubtaskId>,
}

fn pack(remaining: &mut Vec<&Subtask>, capacity: Minutes) -> Vec<SubtaskId> {
    let items: Vec<_> = remaining.iter().map(|s| (s.id, s.expected_time)).collect();
    let chosen = knapsack_select(capacity, &items).ids;
    remaining.retain(|s| chosen.binary_search(&s.id).is_err());
    chosen
}

/// Windows one after another, longest first, each filled by an exact knapsack
/// over the subtasks not yet placed. Leftovers run before the first window.
fn sequential_windows(task: &CompositeTask) -> Schedule {
    let mut devices: Vec<&Subtask> = task.parallelizable().collect();
    devices.sort_by_key(|s| (std::cmp::Reverse(s.expected_time), s.id));

    let mut remaining: Vec<&Subtask> = task.non_parallelizable().collect();
    let windows: Vec<Window> = devices
        .iter()
        .map(|p| Window {
            device: p.id,
            inside: pack(&mut remaining, p.expected_time),
        })
        .collect();

    let mut events: Vec<Event> = remaining.iter().map(|s| Event::Execute(s.id)).collect();
    for w in windows {
        events.push(Event::Start(w.device));
        events.extend(w.inside.into_iter().map(Event::Execute));
        events.push(Event::Recheck(w.device));
    }
    Schedule::new(events)
}

/// Every device is started at time zero. The gaps between consecutive
/// completions are packed in completion order; leftovers run at the end.
fn concurrent_windows(task: &CompositeTask) -> Schedule {
    let mut devices: Vec<&Subtask> = task.parallelizable().collect();
    devices.sort_by_key(|s| (s.expected_time, s.id));

    let mut remaining: Vec<&Subtask> = task.non_parallelizable().collect();
    let mut events: Vec<Event> = devices.iter().map(|p| Event::Start(p.id)).collect();
    let mut clock = 0;
    for p in &devices {
        let inside = pack(&mut remaining, p.expected_time - clock);
        events.extend(inside.into_iter().map(Event::Execute));
        events.push(Event::Recheck(p.id));
        clock = p.expected_time;
    }
    events.extend(remaining.iter().map(|s| Event::Execute(s.id)));
    Schedule::new(events)
}

/// Schedule minimizing makespan. Exact for at most one parallelizable
/// subtask; a window-by-window greedy otherwise.
pub fn solve(task: &CompositeTask, config: &SolverConfig) -> Schedule {
    let sequential = sequential_windows(task);
    match config.overlap_policy {
        OverlapPolicy::Disallowed => sequential,
        OverlapPolicy::Allowed => {
            if task.parallelizable().count() < 2 {
                return sequential;
            }
            let concurrent = concurrent_windows(task);
            let a = makespan(task, &sequential).expect("solver schedules are valid");
            let b = makespan(task, &concurrent).expect("solver schedules are valid");
            if b < a {
                concurrent
            } else {
                sequential
            }
        }
    }
}

pub const ORACLE_MAX_SUBTASKS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle limited to n ≤ {ORACLE_MAX_SUBTASKS} (task {task_id} has {n} subtasks)")]
    TooLarge { task_id: String, n: usize },
    #[error("no feasible schedule found for task {0}")]
    Infeasible(String),
}

const NOT_STARTED: u32 = u32::MAX;
const DONE: u32 = u32::MAX - 1;

/// (executed mask, device states) -> best remaining time and first event.
type Memo = HashMap<(u16, Vec<u32>), Option<(Minutes, Event)>>;

/// Exhaustive search over every event ordering, with identical search states
/// merged. States are relative to the agent clock: the set of executed
/// subtasks plus, for each device, not started / minutes until it completes
/// / rechecked. Work inside an open window must end no later than the
/// device, and the agent rechecks each device when it completes.
struct Oracle<'a> {
    task: &'a CompositeTask,
    allow_overlap: bool,
    np: Vec<SubtaskId>,
    p: Vec<SubtaskId>,
    memo: Memo,
}

impl<'a> Oracle<'a> {
    fn duration(&self, id: SubtaskId) -> Minutes {
        self.task.subtasks[id].expected_time
    }

    fn is_terminal(&self, mask: u16, devices: &[u32]) -> bool {
        mask.count_ones() as usize == self.np.len() && devices.iter().all(|&d| d == DONE)
    }

    fn open_slack(devices: &[u32]) -> Option<u32> {
        devices.iter().filter(|&&d| d < DONE).copied().min()
    }

    fn advance(devices: &[u32], by: u32) -> Vec<u32> {
        devices
            .iter()
            .map(|&d| if d < DONE { d - by } else { d })
            .collect()
    }

    /// Remaining time to finish from this state and the first event that achieves it.
    fn best(&mut self, mask: u16, devices: Vec<u32>) -> Option<(Minutes, Event)> {
        let key = (mask, devices);
        if let Some(&hit) = self.memo.get(&key) {
            return hit;
        }
        let (mask, devices) = key;
        let mut best: Option<(Minutes, Event)> = None;
        let mut consider = |cost: Minutes, event: Event, rest: Option<Minutes>| {
            if let Some(rest) = rest {
                let total = cost + rest;
                if best.is_none_or(|(b, _)| total < b) {
                    best = Some((total, event));
                }
            }
        };

        let slack = Self::open_slack(&devices);
        for k in 0..self.np.len() {
            if mask & (1 << k) != 0 {
                continue;
            }
            let id = self.np[k];
            let t = self.duration(id);
            if slack.is_some_and(|s| t > s) {
                continue;
            }
            let next_mask = mask | (1 << k);
            let next = Self::advance(&devices, t);
            let rest = self.finish(next_mask, next);
            consider(t, Event::Execute(id), rest);
        }
        for j in 0..self.p.len() {
            if devices[j] != NOT_STARTED || (!self.allow_overlap && slack.is_some()) {
                continue;
            }
            let mut next = devices.clone();
            next[j] = self.duration(self.p[j]);
            let rest = self.finish(mask, next);
            consider(0, Event::Start(self.p[j]), rest);
        }
        for j in 0..self.p.len() {
            let left = devices[j];
            if left >= DONE || slack.is_some_and(|s| s < left) {
                continue;
            }
            let mut next = Self::advance(&devices, left);
            next[j] = DONE;
            let rest = self.finish(mask, next);
            consider(left, Event::Recheck(self.p[j]), rest);
        }

        self.memo.insert((mask, devices), best);
        best
    }

    fn finish(&mut self, mask: u16, devices: Vec<u32>) -> Option<Minutes> {
        if self.is_terminal(mask, &devices) {
            Some(0)
        } else {
            self.best(mask, devices).map(|(t, _)| t)
        }
    }

    fn run(mut self) -> Option<(Schedule, Minutes)> {
        let mut mask = 0u16;
        let mut devices = vec![NOT_STARTED; self.p.len()];
        if self.is_terminal(mask, &devices) {
            return Some((Schedule::default(), 0));
        }
        let (total, _) = self.best(mask, devices.clone())?;
        let mut events = Vec::new();
        while !self.is_terminal(mask, &devices) {
            let (_, event) = self.memo[&(mask, devices.clone())].expect("on optimal path");
            events.push(event);
            match event {
                Event::Execute(id) => {
                    let k = self.np.iter().position(|&x| x == id).unwrap();
                    mask |= 1 << k;
                    devices = Self::advance(&devices, self.duration(id));
                }
                Event::Start(id) => {
                    let j = self.p.iter().position(|&x| x == id).unwrap();
                    devices[j] = self.duration(id);
                }
                Event::Recheck(id) => {
                    let j = self.p.iter().position(|&x| x == id).unwrap();
                    devices = Self::advance(&devices, devices[j]);
                    devices[j] = DONE;
                }
            }
        }
        Some((Schedule::new(events), total))
    }
}

/// Minimum-makespan schedule by exhaustive search, for tasks with at most
/// [`ORACLE_MAX_SUBTASKS`] subtasks.
pub fn oracle_solve(
    task: &CompositeTask,
    config: &SolverConfig,
) -> Result<(Schedule, Minutes), OracleError> {
    if task.len() > ORACLE_MAX_SUBTASKS {
        return Err(OracleError::TooLarge {
            task_id: task.task_id.clone(),
            n: task.len(),
        });
    }
    let oracle = Oracle {
        task,
        allow_overlap: config.overlap_policy == OverlapPolicy::Allowed,
        np: task.non_parallelizable().map(|s| s.id).collect(),
        p: task.parallelizable().map(|s| s.id).collect(),
        memo: HashMap::new(),
    };
    oracle
        .run()
        .ok_or_else(|| OracleError::Infeasible(task.task_id.clone()))
}
