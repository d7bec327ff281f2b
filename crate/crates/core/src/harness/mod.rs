//! Experiment orchestration, aggregation and export.

pub mod calibrate;
pub mod criteria;
pub mod experiment;
pub mod export;
pub mod initiation;
pub mod svg;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

pub use experiment::{
    ablation_jobs, aggregate, comparison_jobs, default_threads, run_job, run_jobs, CurvePoint,
    ExperimentConfig, Job, Method, ResultsRow, RunResult, TaskData,
};

use crate::error::Result;
use crate::ppo::Environment;
use crate::seeding;
use crate::sim::{TaskConfig, TaskKind};
use crate::skills;

/// Grid resolution of the exported initiation sets.
pub const INITIATION_GRID: usize = 41;
/// Nominal episodes behind each failure scatter.
pub const SCATTER_EPISODES: u64 = 1000;

/// Per-round option counts of a uniformly random policy, `rounds` rounds of
/// `round_len` actions each.
pub fn uniform_option_rounds<E: Environment>(
    env: &mut E,
    num_options: usize,
    rounds: usize,
    round_len: usize,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    let mut rng = seeding::stream(seed, "uniform-policy");
    let n = env.num_actions();
    env.reset()?;
    let mut out = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let mut counts = vec![0u32; num_options];
        for _ in 0..round_len {
            let step = env.step(rng.random_range(0..n))?;
            if let Some(i) = step.option {
                counts[i - 1] += 1;
            }
            if step.done {
                env.reset()?;
            }
        }
        out.push(counts);
    }
    Ok(out)
}

/// Loads each task's failures from `data_dir`, or collects them when no
/// directory is given.
pub fn load_tasks(
    configs: &[TaskConfig],
    exp: &ExperimentConfig,
    data_dir: Option<&Path>,
) -> Result<BTreeMap<TaskKind, TaskData>> {
    configs
        .iter()
        .map(|c| {
            let d = match data_dir {
                Some(dir) => TaskData::load(c.clone(), dir, exp)?,
                None => TaskData::generate(c.clone(), exp)?,
            };
            Ok((c.task, d))
        })
        .collect()
}

/// Writes the initiation set of the first plan controller and the nominal
/// failure scatter of a task.
pub fn write_task_exports(dir: &Path, cfg: &TaskConfig) -> Result<()> {
    let skill = skills::plan(cfg.task)[0].name();
    export::write_csv(
        &export::initiation_path(dir, skill),
        &initiation::initiation_grid(cfg, 1, INITIATION_GRID)?,
    )?;
    export::write_csv(
        &export::failure_scatter_path(dir, cfg.task),
        &initiation::failure_scatter(cfg, SCATTER_EPISODES)?,
    )
}

/// Everything `train` produces.
#[derive(Debug)]
pub struct Outputs {
    pub runs: Vec<RunResult>,
    pub ablation: Vec<RunResult>,
    pub rows: Vec<ResultsRow>,
}

/// Runs the method comparison on every task, plus the PP ablation when
/// pick-place is included, and writes all CSV and SVG outputs to `dir`.
pub fn run_all(
    dir: &Path,
    data: &BTreeMap<TaskKind, TaskData>,
    methods: &[Method],
    exp: &ExperimentConfig,
    with_ablation: bool,
    threads: usize,
) -> Result<Outputs> {
    exp.validate()?;
    let tasks: Vec<TaskKind> = data.keys().copied().collect();
    let mut jobs = comparison_jobs(&tasks, methods, exp);
    let main = jobs.len();
    let ablation_sizes: Vec<usize> = if with_ablation && data.contains_key(&TaskKind::PickPlace2D) {
        let a = ablation_jobs(exp, &crate::baselines::PP_DATASET_SIZES);
        let sizes = a.iter().map(|j| j.pp_dataset_size).collect();
        jobs.extend(a);
        sizes
    } else {
        Vec::new()
    };
    let mut runs = run_jobs(data, &jobs, exp, threads)?;
    let ablation = runs.split_off(main);
    let rows = export::write_comparison(dir, &runs)?;
    if !ablation.is_empty() {
        export::write_ablation(dir, &ablation, &ablation_sizes)?;
    }
    for d in data.values() {
        write_task_exports(dir, &d.config)?;
    }
    export::render_plots(dir)?;
    Ok(Outputs {
        runs,
        ablation,
        rows,
    })
}

/// Trains PP on pick-place once per dataset size and writes
/// `pp_ablation.csv` with its curves and plots.
pub fn run_ablation(
    dir: &Path,
    data: &TaskData,
    exp: &ExperimentConfig,
    sizes: &[usize],
    threads: usize,
) -> Result<Vec<RunResult>> {
    exp.validate()?;
    let jobs = ablation_jobs(exp, sizes);
    let map = BTreeMap::from([(TaskKind::PickPlace2D, data.clone())]);
    let runs = run_jobs(&map, &jobs, exp, threads)?;
    export::write_ablation(dir, &runs, sizes)?;
    export::render_plots(dir)?;
    Ok(runs)
}
