//! Seeded synthetic benchmark generation: composite tasks drawn from a
//! subtask catalog, their solver schedules, templated step texts and
//! scheduling explanations, and synthetic object masks.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulate::{simulate, InvalidSchedule, SimulationResult};
use crate::solver::{solve, worst_makespan, SolverConfig};
use crate::task::{
    CompositeTask, Event, GroundTruthSolution, Kind, Minutes, PointMask, PredictionRecord,
    Schedule, Subtask, TaskMasks,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskTemplate {
    pub action: String,
    pub object: String,
    pub kind: Kind,
    pub base_time: Minutes,
}

impl SubtaskTemplate {
    fn new(action: &str, object: &str, kind: Kind, base_time: Minutes) -> Self {
        SubtaskTemplate {
            action: action.to_string(),
            object: object.to_string(),
            kind,
            base_time,
        }
    }
}

/// Built-in catalog of household subtasks. Most are short; a handful of
/// long-running appliances give the duration distribution a long tail.
pub fn default_catalog() -> Vec<SubtaskTemplate> {
    use Kind::{NonParallelizable as NP, Parallelizable as P};
    [
        ("wipe", "table", NP, 8),
        ("dust", "shelf", NP, 6),
        ("mop", "floor", NP, 15),
        ("vacuum", "rug", NP, 12),
        ("make", "bed", NP, 5),
        ("fold", "towels", NP, 7),
        ("water", "plants", NP, 4),
        ("organize", "bookshelf", NP, 14),
        ("clean", "mirror", NP, 3),
        ("sweep", "balcony", NP, 10),
        ("scrub", "bathtub", NP, 18),
        ("tidy", "desk", NP, 6),
        ("polish", "cabinet", NP, 9),
        ("empty", "trash can", NP, 2),
        ("arrange", "pillows", NP, 3),
        ("wash", "dishes", NP, 13),
        ("iron", "shirt", NP, 11),
        ("heat food in", "microwave", P, 5),
        ("fill", "sink", P, 4),
        ("run", "dishwasher", P, 45),
        ("run", "washing machine", P, 40),
        ("brew coffee with", "coffee maker", P, 6),
        ("bake bread in", "oven", P, 30),
        ("dry clothes in", "dryer", P, 60),
        ("charge", "robot vacuum", P, 90),
        ("boil water in", "kettle", P, 3),
    ]
    .into_iter()
    .map(|(a, o, k, t)| SubtaskTemplate::new(a, o, k, t))
    .collect()
}

pub fn parse_catalog(bytes: &[u8]) -> Result<Vec<SubtaskTemplate>, GenError> {
    let catalog: Vec<SubtaskTemplate> =
        serde_json::from_slice(bytes).map_err(|e| GenError::Catalog(e.to_string()))?;
    if let Some(t) = catalog.iter().find(|t| t.base_time < 1) {
        return Err(GenError::Catalog(format!(
            "template '{} the {}': base_time must be ≥ 1",
            t.action, t.object
        )));
    }
    Ok(catalog)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub num_tasks: usize,
    pub min_subtasks: usize,
    pub max_subtasks: usize,
    pub perturbation: f64,
    pub max_parallel_per_task: usize,
    /// Draw templates with replacement; needed when tasks are larger than the catalog.
    #[serde(default)]
    pub allow_repeats: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            num_tasks: 100,
            min_subtasks: 4,
            max_subtasks: 7,
            perturbation: 0.10,
            max_parallel_per_task: 2,
            allow_repeats: false,
        }
    }
}

impl GenConfig {
    pub fn check(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::Config(m));
        if !(0.0..0.5).contains(&self.perturbation) {
            return bad(format!(
                "perturbation {} out of range [0, 0.5)",
                self.perturbation
            ));
        }
        if self.min_subtasks < 1 || self.max_subtasks > 50 || self.min_subtasks > self.max_subtasks
        {
            return bad(format!(
                "subtask count range {}..={} must lie within 1..=50",
                self.min_subtasks, self.max_subtasks
            ));
        }
        if self.num_tasks < 1 {
            return bad("num_tasks must be positive".into());
        }
        if self.max_parallel_per_task < 1 {
            return bad("max_parallel_per_task must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error("catalog has {available} templates but a task needs {needed} distinct ones")]
    CatalogTooSmall { needed: usize, available: usize },
    #[error(transparent)]
    Schedule(#[from] InvalidSchedule),
}

/// Everything one generation run produces, in task order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tasks: Vec<CompositeTask>,
    pub solutions: Vec<GroundTruthSolution>,
    pub masks: Vec<TaskMasks>,
}

impl Dataset {
    /// Ground truth restated as model output: true types, the optimal
    /// schedule, its step texts and each step's object mask.
    pub fn reference_predictions(&self) -> Vec<PredictionRecord> {
        self.tasks
            .iter()
            .zip(&self.solutions)
            .zip(&self.masks)
            .map(|((task, sol), masks)| PredictionRecord {
                task_id: task.task_id.clone(),
                predicted_types: Some(task.kinds()),
                schedule: sol.schedule.clone(),
                step_texts: Some(sol.step_texts.clone()),
                predicted_masks: Some(
                    sol.schedule
                        .events
                        .iter()
                        .map(|e| masks.masks[e.subtask()].clone())
                        .collect(),
                ),
            })
            .collect()
    }
}

fn perturb(rng: &mut ChaCha8Rng, base: Minutes, p: f64) -> Minutes {
    if p == 0.0 {
        return base;
    }
    let u = rng.gen_range(1.0 - p..=1.0 + p);
    ((f64::from(base) * u).round() as Minutes).max(1)
}

fn draw<'a>(
    rng: &mut ChaCha8Rng,
    pool: &[&'a SubtaskTemplate],
    count: usize,
    repeats: bool,
) -> Vec<&'a SubtaskTemplate> {
    if repeats {
        (0..count)
            .map(|_| *pool.choose(rng).expect("non-empty pool"))
            .collect()
    } else {
        pool.choose_multiple(rng, count).copied().collect()
    }
}

pub fn generate(config: &GenConfig, catalog: &[SubtaskTemplate]) -> Result<Dataset, GenError> {
    config.check()?;
    let p_pool: Vec<&SubtaskTemplate> = catalog
        .iter()
        .filter(|t| t.kind.is_parallelizable())
        .collect();
    let np_pool: Vec<&SubtaskTemplate> = catalog
        .iter()
        .filter(|t| !t.kind.is_parallelizable())
        .collect();
    if np_pool.is_empty() {
        return Err(GenError::Catalog(
            "needs at least one non-parallelizable template".into(),
        ));
    }
    if let Some(t) = catalog.iter().find(|t| t.base_time < 1) {
        return Err(GenError::Catalog(format!(
            "template '{}': base_time must be ≥ 1",
            t.object
        )));
    }
    if !config.allow_repeats && catalog.len() < config.max_subtasks {
        return Err(GenError::CatalogTooSmall {
            needed: config.max_subtasks,
            available: catalog.len(),
        });
    }

    let solver = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Dataset {
        tasks: Vec::with_capacity(config.num_tasks),
        solutions: Vec::with_capacity(config.num_tasks),
        masks: Vec::with_capacity(config.num_tasks),
    };

    for index in 0..config.num_tasks {
        let n = rng.gen_range(config.min_subtasks..=config.max_subtasks);

        let (p_lo, p_hi) = if config.allow_repeats {
            let hi = if p_pool.is_empty() {
                0
            } else {
                config.max_parallel_per_task.min(n)
            };
            (hi.min(1), hi)
        } else {
            let hi = config.max_parallel_per_task.min(p_pool.len()).min(n);
            let lo = n
                .saturating_sub(np_pool.len())
                .max(usize::from(!p_pool.is_empty()));
            (lo, hi)
        };
        if p_lo > p_hi {
            return Err(GenError::CatalogTooSmall {
                needed: n,
                available: catalog.len(),
            });
        }
        let p_count = rng.gen_range(p_lo..=p_hi);

        let mut picked = draw(&mut rng, &p_pool, p_count, config.allow_repeats);
        picked.extend(draw(&mut rng, &np_pool, n - p_count, config.allow_repeats));
        picked.shuffle(&mut rng);

        let mut seen: HashMap<&str, usize> = HashMap::new();
        let subtasks: Vec<Subtask> = picked
            .iter()
            .enumerate()
            .map(|(id, t)| {
                let count = seen.entry(t.object.as_str()).or_default();
                *count += 1;
                let object = if *count == 1 {
                    t.object.clone()
                } else {
                    format!("{} {}", t.object, count)
                };
                Subtask {
                    id,
                    description: format!("{} the {}", t.action, object),
                    kind: t.kind,
                    expected_time: perturb(&mut rng, t.base_time, config.perturbation),
                    target_object: object,
                }
            })
            .collect();

        let task = CompositeTask {
            task_id: format!("task-{index:06}"),
            scene_id: format!("scene-{:04}", rng.gen_range(0..4000)),
            subtasks,
        };

        let mut offset: u32 = rng.gen_range(0..32);
        let masks = task
            .subtasks
            .iter()
            .map(|_| {
                let size: u32 = rng.gen_range(40..=120);
                let block = (offset..offset + size).collect::<PointMask>();
                offset += size + rng.gen_range(0..32);
                block
            })
            .collect();

        let solution = solve_to_ground_truth(&task, &solver)?;
        out.masks.push(TaskMasks {
            task_id: task.task_id.clone(),
            masks,
        });
        out.solutions.push(solution);
        out.tasks.push(task);
    }
    Ok(out)
}

/// Solves a task and packages the schedule with its makespans and texts.
pub fn solve_to_ground_truth(
    task: &CompositeTask,
    config: &SolverConfig,
) -> Result<GroundTruthSolution, GenError> {
    let schedule = solve(task, config);
    let sim = simulate(task, &schedule)?;
    let step_texts = render_steps(task, &schedule)?;
    let explanation = render_explanation(task, &schedule, &sim);
    Ok(GroundTruthSolution {
        task_id: task.task_id.clone(),
        optimal_makespan: sim.makespan,
        worst_makespan: worst_makespan(task),
        step_texts,
        explanation,
        schedule,
    })
}

/// One sentence per event, numbered from 1.
pub fn render_steps(
    task: &CompositeTask,
    schedule: &Schedule,
) -> Result<Vec<String>, InvalidSchedule> {
    let errors = crate::simulate::validate_schedule(task, schedule);
    if !errors.is_empty() {
        return Err(InvalidSchedule { errors });
    }
    Ok(schedule
        .events
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let k = i + 1;
            let s = &task.subtasks[e.subtask()];
            match e {
                Event::Execute(_) => format!("Step {k}: {}.", s.description),
                Event::Start(_) => {
                    format!("Step {k}: Start the {} and let it run.", s.target_object)
                }
                Event::Recheck(_) => {
                    format!("Step {k}: Return to the {} and finish up.", s.target_object)
                }
            }
        })
        .collect())
}

fn join_list(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// Relative saving in whole percent, rounded half up.
fn percent(saving: Minutes, worst: Minutes) -> u64 {
    if worst == 0 {
        0
    } else {
        (200 * u64::from(saving) + u64::from(worst)) / (2 * u64::from(worst))
    }
}

pub fn render_explanation(
    task: &CompositeTask,
    schedule: &Schedule,
    sim: &SimulationResult,
) -> String {
    let worst = worst_makespan(task);
    let saving = worst.saturating_sub(sim.makespan);
    let pct = percent(saving, worst);

    if task.parallelizable().next().is_none() {
        return format!(
            "No subtask can run unattended, so no parallel window exists: all {} subtasks run back to back \
             in {} minutes, saving {} minutes ({}% efficiency gain).",
            task.len(),
            sim.makespan,
            saving,
            pct
        );
    }

    // Work is attributed to the most recently started open window.
    let mut open: Vec<usize> = Vec::new();
    let mut inside: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut order = Vec::new();
    let mut outside = Vec::new();
    for &e in &schedule.events {
        match e {
            Event::Start(p) => {
                open.push(p);
                order.push(p);
                inside.entry(p).or_default();
            }
            Event::Recheck(p) => open.retain(|&x| x != p),
            Event::Execute(i) => match open.last() {
                Some(&p) => inside.entry(p).or_default().push(i),
                None => outside.push(i),
            },
        }
    }

    let mut parts = Vec::new();
    for p in order {
        let dev = &task.subtasks[p];
        let work = &inside[&p];
        if work.is_empty() {
            parts.push(format!(
                "The {} runs for {} minutes with nothing packed into its waiting period.",
                dev.target_object, dev.expected_time
            ));
        } else {
            let names: Vec<&str> = work
                .iter()
                .map(|&i| task.subtasks[i].description.as_str())
                .collect();
            let used: Minutes = work.iter().map(|&i| task.subtasks[i].expected_time).sum();
            parts.push(format!(
                "While the {} runs for {} minutes, {} ({} minutes) fill its waiting period.",
                dev.target_object,
                dev.expected_time,
                join_list(&names),
                used
            ));
        }
    }
    if !outside.is_empty() {
        let names: Vec<&str> = outside
            .iter()
            .map(|&i| task.subtasks[i].description.as_str())
            .collect();
        parts.push(format!(
            "{} run outside any waiting period.",
            capitalize(&join_list(&names))
        ));
    }
    parts.push(format!(
        "Total time is {} minutes instead of {} minutes sequentially, saving {} minutes ({}% efficiency gain).",
        sim.makespan, worst, saving, pct
    ));
    parts.join(" ")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::validate_schedule;
    use crate::task::serialize_jsonl;
    use crate::task::Kind::{NonParallelizable as NP, Parallelizable as P};
    use Event::*;

    fn named(items: &[(&str, &str, Kind, Minutes)]) -> CompositeTask {
        CompositeTask {
            task_id: "t".into(),
            scene_id: "s".into(),
            subtasks: items
                .iter()
                .enumerate()
                .map(|(id, &(a, o, kind, t))| Subtask {
                    id,
                    description: format!("{a} the {o}"),
                    kind,
                    expected_time: t,
                    target_object: o.into(),
                })
                .collect(),
        }
    }

    #[test]
    fn step_templates() {
        let t = named(&[("wipe", "table", NP, 5), ("run", "microwave", P, 10)]);
        let s = Schedule::new(vec![Execute(0), Start(1), Recheck(1)]);
        assert_eq!(
            render_steps(&t, &s).unwrap(),
            vec![
                "Step 1: wipe the table.",
                "Step 2: Start the microwave and let it run.",
                "Step 3: Return to the microwave and finish up.",
            ]
        );
        assert!(render_steps(&t, &Schedule::new(vec![Execute(0)])).is_err());
    }

    #[test]
    fn explanation_fig7() {
        let t = named(&[
            ("wipe", "table", NP, 15),
            ("dust", "shelf", NP, 14),
            ("mop", "floor", NP, 15),
            ("heat food in", "microwave", P, 30),
        ]);
        // The 30-minute window holds the table and the shelf; the floor runs first.
        let s = Schedule::new(vec![
            Execute(2),
            Start(3),
            Execute(0),
            Execute(1),
            Recheck(3),
        ]);
        let sim = simulate(&t, &s).unwrap();
        assert_eq!(sim.makespan, 45);
        let text = render_explanation(&t, &s, &sim);
        assert!(text.contains("saving 29 minutes"), "{text}");
        assert!(text.contains("39%"), "{text}");
        assert!(text.contains("microwave"), "{text}");
        assert!(
            text.contains("wipe the table and dust the shelf (29 minutes)"),
            "{text}"
        );
    }

    #[test]
    fn explanation_without_windows() {
        let t = named(&[("wipe", "table", NP, 5), ("dust", "shelf", NP, 4)]);
        let s = solve(&t, &SolverConfig::default());
        let text = render_explanation(&t, &s, &simulate(&t, &s).unwrap());
        assert!(text.contains("no parallel window exists"), "{text}");
        assert!(text.contains("saving 0 minutes"), "{text}");
    }

    #[test]
    fn explanation_lone_device() {
        let t = named(&[("run", "dishwasher", P, 45)]);
        let s = solve(&t, &SolverConfig::default());
        let text = render_explanation(&t, &s, &simulate(&t, &s).unwrap());
        assert!(
            text.contains("saving 0 minutes (0% efficiency gain)"),
            "{text}"
        );
        assert!(text.contains("dishwasher"), "{text}");
    }

    #[test]
    fn percent_rounds_to_nearest() {
        assert_eq!(percent(29, 74), 39);
        assert_eq!(percent(1, 8), 13);
        assert_eq!(percent(0, 0), 0);
    }

    #[test]
    fn default_catalog_shape() {
        let c = default_catalog();
        assert!(c.len() >= 20);
        assert!(c.iter().filter(|t| t.kind == P).count() >= 5);
        let json = serde_json::to_vec(&c).unwrap();
        assert_eq!(parse_catalog(&json).unwrap(), c);
    }

    #[test]
    fn deterministic() {
        let cfg = GenConfig {
            seed: 1,
            num_tasks: 50,
            ..Default::default()
        };
        let a = generate(&cfg, &default_catalog()).unwrap();
        let b = generate(&cfg, &default_catalog()).unwrap();
        assert_eq!(serialize_jsonl(&a.tasks), serialize_jsonl(&b.tasks));
        assert_eq!(serialize_jsonl(&a.solutions), serialize_jsonl(&b.solutions));
        let c = generate(&GenConfig { seed: 2, ..cfg }, &default_catalog()).unwrap();
        assert_ne!(a.tasks, c.tasks);
    }

    #[test]
    fn zero_perturbation_keeps_base_times() {
        let catalog = default_catalog();
        let cfg = GenConfig {
            seed: 3,
            num_tasks: 40,
            perturbation: 0.0,
            ..Default::default()
        };
        let d = generate(&cfg, &catalog).unwrap();
        for task in &d.tasks {
            for s in &task.subtasks {
                let t = catalog
                    .iter()
                    .find(|t| t.object == s.target_object)
                    .unwrap();
                assert_eq!(s.expected_time, t.base_time);
            }
        }
    }

    #[test]
    fn perturbed_thirty() {
        let catalog = vec![
            SubtaskTemplate::new("bake bread in", "oven", P, 30),
            SubtaskTemplate::new("wipe", "table", NP, 30),
        ];
        let cfg = GenConfig {
            seed: 11,
            num_tasks: 300,
            min_subtasks: 1,
            max_subtasks: 2,
            ..Default::default()
        };
        let d = generate(&cfg, &catalog).unwrap();
        let times: Vec<_> = d
            .tasks
            .iter()
            .flat_map(|t| t.subtasks.iter().map(|s| s.expected_time))
            .collect();
        assert!(times.iter().all(|t| (27..=33).contains(t)));
        assert!(times.contains(&27) && times.contains(&33));
    }

    #[test]
    fn solutions_are_consistent() {
        let d = generate(
            &GenConfig {
                seed: 5,
                num_tasks: 200,
                ..Default::default()
            },
            &default_catalog(),
        )
        .unwrap();
        for ((task, sol), masks) in d.tasks.iter().zip(&d.solutions).zip(&d.masks) {
            assert!((4..=7).contains(&task.len()));
            assert!((1..=2).contains(&task.parallelizable().count()));
            assert!(task.check().is_ok());
            assert!(validate_schedule(task, &sol.schedule).is_empty());
            assert_eq!(
                simulate(task, &sol.schedule).unwrap().makespan,
                sol.optimal_makespan
            );
            assert_eq!(sol.worst_makespan, worst_makespan(task));
            assert_eq!(sol.step_texts.len(), sol.schedule.len());
            assert_eq!(masks.masks.len(), task.len());
            for (i, a) in masks.masks.iter().enumerate() {
                for b in &masks.masks[i + 1..] {
                    assert!(a.0.is_disjoint(&b.0));
                }
            }
        }
    }

    #[test]
    fn config_errors() {
        let cat = default_catalog();
        let bad = |cfg: GenConfig| generate(&cfg, &cat).unwrap_err();
        assert!(matches!(
            bad(GenConfig {
                perturbation: 0.9,
                ..Default::default()
            }),
            GenError::Config(_)
        ));
        assert!(matches!(
            bad(GenConfig {
                max_subtasks: 51,
                ..Default::default()
            }),
            GenError::Config(_)
        ));
        assert!(matches!(
            bad(GenConfig {
                min_subtasks: 30,
                max_subtasks: 30,
                ..Default::default()
            }),
            GenError::CatalogTooSmall { .. }
        ));
        let only_p = vec![SubtaskTemplate::new("run", "oven", P, 10)];
        assert!(matches!(
            generate(&GenConfig::default(), &only_p),
            Err(GenError::Catalog(_))
        ));
    }

    #[test]
    fn repeats_reach_fifty() {
        let cfg = GenConfig {
            seed: 9,
            num_tasks: 3,
            min_subtasks: 50,
            max_subtasks: 50,
            allow_repeats: true,
            ..Default::default()
        };
        let d = generate(&cfg, &default_catalog()).unwrap();
        for t in &d.tasks {
            assert_eq!(t.len(), 50);
            let mut objects: Vec<_> = t
                .subtasks
                .iter()
                .map(|s| s.target_object.as_str())
                .collect();
            objects.sort();
            objects.dedup();
            assert_eq!(objects.len(), 50);
        }
    }

    #[test]
    fn reference_predictions_align() {
        let d = generate(
            &GenConfig {
                seed: 4,
                num_tasks: 5,
                ..Default::default()
            },
            &default_catalog(),
        )
        .unwrap();
        let preds = d.reference_predictions();
        assert_eq!(preds.len(), 5);
        assert_eq!(preds[0].schedule, d.solutions[0].schedule);
        assert_eq!(
            preds[0].predicted_masks.as_ref().unwrap().len(),
            d.solutions[0].schedule.len()
        );
    }
}
