//! Scheduling of composite tasks whose subtasks are either hands-on
//! (non-parallelizable) or unattended devices (parallelizable) that only need
//! to be started and rechecked.
//!
//! * [`task`]: domain types and JSON-lines formats
//! * [`solver`]: knapsack window packing, greedy multi-window solver, exhaustive oracle
//! * [`simulate`]: schedule validation and makespan simulation
//! * [`metrics`]: time efficiency, type recognition, grounding, ROUGE-L
//! * [`datagen`]: seeded synthetic benchmark generation
//! * [`eval`]: scoring prediction files into a report

pub mod datagen;
pub mod eval;
pub mod metrics;
pub mod simulate;
pub mod solver;
pub mod task;

pub use datagen::{default_catalog, generate, Dataset, GenConfig, GenError, SubtaskTemplate};
pub use eval::{evaluate, evaluate_te, EvalOptions, EvalReport};
pub use metrics::{GroundingReport, TypeRecognitionReport};
pub use simulate::{
    simulate, validate_schedule, SimulationResult, ValidationError, ValidationErrorKind,
};
pub use solver::{
    knapsack_select, oracle_solve, solve, worst_makespan, OverlapPolicy, SolverConfig,
};
pub use task::{
    CompositeTask, Event, GroundTruthSolution, Kind, Minutes, PointMask, PredictionRecord,
    Schedule, Subtask, SubtaskId, TaskMasks,
};
