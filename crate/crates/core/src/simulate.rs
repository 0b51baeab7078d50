//! Schedule validation and single-agent execution.
//!
//! The agent has one clock starting at 0. `Execute(i)` occupies the agent for
//! `tᵢ` minutes. `Start(p)` switches a device on and costs no agent time; the
//! device finishes `t_p` minutes later. `Recheck(p)` makes the agent wait
//! until that device has finished. Several devices may run at once.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{CompositeTask, Event, Kind, Minutes, Schedule, SubtaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValidationErrorKind {
    MissingSubtask,
    DuplicateEvent,
    RecheckBeforeStart,
    KindMismatch,
    UnknownSubtask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValidationError {
    pub kind: ValidationErrorKind,
    pub subtask_id: SubtaskId,
}

impl ValidationError {
    fn new(kind: ValidationErrorKind, subtask_id: SubtaskId) -> Self {
        ValidationError { kind, subtask_id }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ValidationErrorKind::MissingSubtask => "is never completed",
            ValidationErrorKind::DuplicateEvent => "has a duplicated event",
            ValidationErrorKind::RecheckBeforeStart => "is rechecked before it is started",
            ValidationErrorKind::KindMismatch => "is used with an event that does not fit its kind",
            ValidationErrorKind::UnknownSubtask => "does not exist in the task",
        };
        write!(
            f,
            "{:?}({}): subtask {} {}",
            self.kind, self.subtask_id, self.subtask_id, what
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid schedule: {}", .errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct InvalidSchedule {
    pub errors: Vec<ValidationError>,
}

/// Returns every rule the schedule breaks, in event order followed by
/// missing subtasks in id order. An empty list means the schedule is valid.
pub fn validate_schedule(task: &CompositeTask, schedule: &Schedule) -> Vec<ValidationError> {
    use ValidationErrorKind::*;

    let n = task.len();
    let mut executed = vec![false; n];
    let mut started = vec![false; n];
    let mut rechecked = vec![false; n];
    let mut errors = Vec::new();

    for &event in &schedule.events {
        let id = event.subtask();
        let Some(sub) = task.subtask(id) else {
            errors.push(ValidationError::new(UnknownSubtask, id));
            continue;
        };
        match (event, sub.kind) {
            (Event::Execute(_), Kind::NonParallelizable) => {
                if executed[id] {
                    errors.push(ValidationError::new(DuplicateEvent, id));
                }
                executed[id] = true;
            }
            (Event::Start(_), Kind::Parallelizable) => {
                if started[id] {
                    errors.push(ValidationError::new(DuplicateEvent, id));
                }
                started[id] = true;
            }
            (Event::Recheck(_), Kind::Parallelizable) => {
                if rechecked[id] {
                    errors.push(ValidationError::new(DuplicateEvent, id));
                } else if !started[id] {
                    errors.push(ValidationError::new(RecheckBeforeStart, id));
                }
                rechecked[id] = true;
            }
            _ => errors.push(ValidationError::new(KindMismatch, id)),
        }
    }

    for sub in &task.subtasks {
        let done = match sub.kind {
            Kind::NonParallelizable => executed[sub.id],
            Kind::Parallelizable => started[sub.id] && rechecked[sub.id],
        };
        if !done {
            errors.push(ValidationError::new(MissingSubtask, sub.id));
        }
    }
    errors
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub event: Event,
    /// Agent clock when the event begins.
    pub start: Minutes,
    /// Execute: agent finishes. Start: device finishes. Recheck: agent is done waiting.
    pub end: Minutes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub makespan: Minutes,
    pub timeline: Vec<TimelineEntry>,
    /// Idle minutes the agent spent at each recheck, per parallelizable subtask.
    pub waits: Vec<(SubtaskId, Minutes)>,
    /// Minutes by which each recheck came after the device had already finished.
    pub overruns: Vec<(SubtaskId, Minutes)>,
}

pub fn simulate(
    task: &CompositeTask,
    schedule: &Schedule,
) -> Result<SimulationResult, InvalidSchedule> {
    let errors = validate_schedule(task, schedule);
    if !errors.is_empty() {
        return Err(InvalidSchedule { errors });
    }

    let mut clock: Minutes = 0;
    let mut device_done: Vec<Option<Minutes>> = vec![None; task.len()];
    let mut timeline = Vec::with_capacity(schedule.len());
    let mut waits = Vec::new();
    let mut overruns = Vec::new();

    for &event in &schedule.events {
        let id = event.subtask();
        let duration = task.subtasks[id].expected_time;
        let begin = clock;
        let end = match event {
            Event::Execute(_) => {
                clock += duration;
                clock
            }
            Event::Start(_) => {
                let done = clock + duration;
                device_done[id] = Some(done);
                done
            }
            Event::Recheck(_) => {
                let done = device_done[id].expect("validated: started before recheck");
                waits.push((id, done.saturating_sub(clock)));
                overruns.push((id, clock.saturating_sub(done)));
                clock = clock.max(done);
                clock
            }
        };
        timeline.push(TimelineEntry {
            event,
            start: begin,
            end,
        });
    }

    Ok(SimulationResult {
        makespan: clock,
        timeline,
        waits,
        overruns,
    })
}

/// Makespan of a schedule, or the validation errors that prevent simulating it.
pub fn makespan(task: &CompositeTask, schedule: &Schedule) -> Result<Minutes, InvalidSchedule> {
    simulate(task, schedule).map(|r| r.makespan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::Kind::{NonParallelizable as NP, Parallelizable as P};
    use proptest::prelude::*;
    use Event::*;

    fn four() -> CompositeTask {
        CompositeTask::from_durations("t", &[(NP, 6), (NP, 5), (NP, 4), (P, 10)])
    }

    #[test]
    fn single_window_timeline() {
        let s = Schedule::new(vec![
            Execute(1),
            Start(3),
            Execute(0),
            Execute(2),
            Recheck(3),
        ]);
        assert!(validate_schedule(&four(), &s).is_empty());
        let r = simulate(&four(), &s).unwrap();
        assert_eq!(r.makespan, 15);
        assert_eq!(r.waits, vec![(3, 0)]);
        let spans: Vec<_> = r.timeline.iter().map(|e| (e.start, e.end)).collect();
        assert_eq!(spans, vec![(0, 5), (5, 15), (5, 11), (11, 15), (15, 15)]);
    }

    #[test]
    fn sequential_waits_for_device() {
        let s = Schedule::new(vec![
            Execute(0),
            Execute(1),
            Execute(2),
            Start(3),
            Recheck(3),
        ]);
        let r = simulate(&four(), &s).unwrap();
        assert_eq!(r.makespan, 25);
        assert_eq!(r.waits, vec![(3, 10)]);
    }

    #[test]
    fn empty() {
        let t = CompositeTask::from_durations("e", &[]);
        let r = simulate(&t, &Schedule::default()).unwrap();
        assert_eq!(r.makespan, 0);
        assert!(r.timeline.is_empty());
    }

    #[test]
    fn recheck_before_start() {
        let s = Schedule::new(vec![
            Recheck(3),
            Start(3),
            Execute(0),
            Execute(1),
            Execute(2),
        ]);
        assert_eq!(
            validate_schedule(&four(), &s),
            vec![ValidationError::new(
                ValidationErrorKind::RecheckBeforeStart,
                3
            )]
        );
    }

    #[test]
    fn missing_execute() {
        let s = Schedule::new(vec![Execute(1), Start(3), Execute(0), Recheck(3)]);
        assert_eq!(
            validate_schedule(&four(), &s),
            vec![ValidationError::new(ValidationErrorKind::MissingSubtask, 2)]
        );
        let err = simulate(&four(), &s).unwrap_err();
        assert_eq!(err.errors.len(), 1);
    }

    #[test]
    fn kind_unknown_and_duplicates() {
        use ValidationErrorKind::*;
        let s = Schedule::new(vec![
            Execute(3),
            Start(0),
            Execute(9),
            Execute(1),
            Execute(1),
            Execute(2),
            Start(3),
            Start(3),
            Recheck(3),
            Recheck(3),
        ]);
        let errs = validate_schedule(&four(), &s);
        let kinds: Vec<_> = errs.iter().map(|e| (e.kind, e.subtask_id)).collect();
        assert_eq!(
            kinds,
            vec![
                (KindMismatch, 3),
                (KindMismatch, 0),
                (UnknownSubtask, 9),
                (DuplicateEvent, 1),
                (DuplicateEvent, 3),
                (DuplicateEvent, 3),
                (MissingSubtask, 0),
            ]
        );
    }

    #[test]
    fn late_recheck_is_an_overrun() {
        let t = CompositeTask::from_durations("t", &[(P, 10), (NP, 25)]);
        let r = simulate(&t, &Schedule::new(vec![Start(0), Execute(1), Recheck(0)])).unwrap();
        assert_eq!(r.makespan, 25);
        assert_eq!(r.waits, vec![(0, 0)]);
        assert_eq!(r.overruns, vec![(0, 15)]);
    }

    fn arb_task() -> impl Strategy<Value = CompositeTask> {
        prop::collection::vec((any::<bool>(), 1u32..40), 1..9).prop_map(|v| {
            let shape: Vec<_> = v
                .into_iter()
                .map(|(p, t)| (if p { P } else { NP }, t))
                .collect();
            CompositeTask::from_durations("prop", &shape)
        })
    }

    /// A random valid schedule: a permutation of NP executions with every
    /// P start/recheck pair inserted at random positions.
    fn arb_task_and_schedule() -> impl Strategy<Value = (CompositeTask, Schedule)> {
        arb_task()
            .prop_flat_map(|task| {
                let len = task.len() + task.parallelizable().count();
                (Just(task), prop::collection::vec(any::<u32>(), len))
            })
            .prop_map(|(task, keys)| {
                let mut events: Vec<Event> = Vec::new();
                let mut k = keys.into_iter();
                for s in &task.subtasks {
                    if s.kind.is_parallelizable() {
                        let a = k.next().unwrap() as usize % (events.len() + 1);
                        events.insert(a, Start(s.id));
                        let b = a + 1 + k.next().unwrap() as usize % (events.len() - a);
                        events.insert(b, Recheck(s.id));
                    } else {
                        let a = k.next().unwrap() as usize % (events.len() + 1);
                        events.insert(a, Execute(s.id));
                    }
                }
                (task, Schedule::new(events))
            })
    }

    proptest! {
        #[test]
        fn sequential_schedule_costs_the_sum(task in arb_task()) {
            let total: u32 = task.subtasks.iter().map(|s| s.expected_time).sum();
            prop_assert_eq!(makespan(&task, &Schedule::sequential(&task)).unwrap(), total);
        }

        #[test]
        fn pure_np_permutations_agree(durs in prop::collection::vec(1u32..50, 1..8), seed in any::<u64>()) {
            let shape: Vec<_> = durs.iter().map(|&t| (NP, t)).collect();
            let task = CompositeTask::from_durations("np", &shape);
            let mut ids: Vec<_> = (0..durs.len()).collect();
            let mut x = seed;
            for i in (1..ids.len()).rev() {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ids.swap(i, (x >> 33) as usize % (i + 1));
            }
            let s: Schedule = ids.into_iter().map(Execute).collect();
            prop_assert_eq!(makespan(&task, &s).unwrap(), durs.iter().sum::<u32>());
        }

        #[test]
        fn lower_bounds_and_timeline_order((task, s) in arb_task_and_schedule()) {
            prop_assert!(validate_schedule(&task, &s).is_empty());
            let r = simulate(&task, &s).unwrap();
            let np: u32 = task.non_parallelizable().map(|s| s.expected_time).sum();
            let longest = task.parallelizable().map(|s| s.expected_time).max().unwrap_or(0);
            prop_assert!(r.makespan >= np);
            prop_assert!(r.makespan >= longest);
            prop_assert!(r.timeline.windows(2).all(|w| w[0].start <= w[1].start));
            prop_assert_eq!(r.timeline.last().map(|e| e.end).unwrap_or(0), r.makespan);
        }

        /// Single window: makespan = before + max(T_P, inside) + after.
        #[test]
        fn window_formula(durs in prop::collection::vec(1u32..30, 0..8), tp in 1u32..60, mask in any::<u8>()) {
            let mut shape: Vec<_> = durs.iter().map(|&t| (NP, t)).collect();
            shape.push((P, tp));
            let task = CompositeTask::from_durations("w", &shape);
            let p = durs.len();
            let (inside, outside): (Vec<_>, Vec<_>) = (0..p).partition(|&i| mask & (1 << i) != 0);
            let mut events: Vec<Event> = outside.iter().map(|&i| Execute(i)).collect();
            events.push(Start(p));
            events.extend(inside.iter().map(|&i| Execute(i)));
            events.push(Recheck(p));
            let sum = |v: &[usize]| v.iter().map(|&i| durs[i]).sum::<u32>();
            let expect = sum(&outside) + tp.max(sum(&inside));
            prop_assert_eq!(makespan(&task, &Schedule::new(events)).unwrap(), expect);
        }
    }
}
