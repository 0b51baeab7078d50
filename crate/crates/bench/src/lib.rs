//! Fixtures shared by the criterion benches.

use orsched_core::{default_catalog, generate, CompositeTask, GenConfig};

/// Subtask counts timed by the solver benches.
pub const SIZES: [usize; 7] = [4, 5, 6, 7, 10, 20, 50];

/// `count` synthetic tasks with exactly `n` subtasks each.
pub fn tasks_of_size(n: usize, count: usize, seed: u64) -> Vec<CompositeTask> {
    generate(
        &GenConfig {
            seed,
            num_tasks: count,
            min_subtasks: n,
            max_subtasks: n,
            allow_repeats: true,
            ..Default::default()
        },
        &default_catalog(),
    )
    .expect("default catalog generates any size up to 50")
    .tasks
}
