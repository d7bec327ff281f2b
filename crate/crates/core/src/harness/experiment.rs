use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::baselines::{pp_env, rlr_env, PpModel};
use crate::discovery::{discover_failures, FailureDataset, FailureRecord, HELD_OUT_SEED_BASE};
use crate::error::{Error, Result};
use crate::lazy::{Audit, LazyGate};
use crate::ppo::{self, PolicyNetwork, PpoConfig, UpdateLog};
use crate::rc_mdp::{recovery_rate, Execution, RcEnv, Variant};
use crate::seeding;
use crate::sim::{TaskConfig, TaskKind};
use crate::skills;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Nominal,
    Rc,
    LazyRc,
    Pp,
    Rlr,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Nominal,
        Method::Rc,
        Method::LazyRc,
        Method::Pp,
        Method::Rlr,
    ];
    pub const LEARNED: [Method; 4] = [Method::Rc, Method::LazyRc, Method::Pp, Method::Rlr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nominal => "nominal",
            Method::Rc => "rc",
            Method::LazyRc => "lazy_rc",
            Method::Pp => "pp",
            Method::Rlr => "rlr",
        }
    }

    pub fn uses_options(self) -> bool {
        matches!(self, Method::Rc | Method::LazyRc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_'))
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "nominal" => Ok(Method::Nominal),
            "rc" => Ok(Method::Rc),
            "lazyrc" | "lazy" => Ok(Method::LazyRc),
            "pp" => Ok(Method::Pp),
            "rlr" => Ok(Method::Rlr),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

/// Everything that determines an experiment's outputs besides the task
/// geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub ppo: PpoConfig,
    /// Failures collected for training (the discovery target).
    pub train_failures: usize,
    /// Held-out failures each final policy is evaluated on.
    pub eval_failures: usize,
    /// Episode budget for collecting either failure set.
    pub max_discovery_episodes: u64,
    /// Policy updates between learning-curve rows.
    pub curve_every: usize,
    /// Held-out failures used for the recovery column of learning curves.
    pub curve_records: usize,
    pub pp_dataset_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            ppo: PpoConfig::default(),
            train_failures: crate::discovery::DEFAULT_FAILURE_TARGET,
            eval_failures: 200,
            max_discovery_episodes: 5000,
            curve_every: 20,
            curve_records: 50,
            pp_dataset_size: 400,
        }
    }
}

impl ExperimentConfig {
    pub fn paper_scale(mut self) -> Self {
        self.ppo = self.ppo.paper_scale();
        self
    }

    pub fn paper_scale_200k(mut self) -> Self {
        self.ppo = self.ppo.paper_scale_200k();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.train_failures == 0
            || self.eval_failures == 0
            || self.curve_every == 0
            || self.curve_records == 0
        {
            return Err(Error::Config(
                "failure counts and curve settings must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn dataset_path(dir: &Path, task: TaskKind) -> PathBuf {
    dir.join(format!("failures_{}.jsonl", task.name()))
}

/// Training failures plus the held-out failures of one task.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub config: TaskConfig,
    pub train: Arc<Vec<FailureRecord>>,
    pub held_out: FailureDataset,
}

impl TaskData {
    /// Loads the training failures written by `discover`.
    pub fn load(config: TaskConfig, data_dir: &Path, exp: &ExperimentConfig) -> Result<Self> {
        let train = FailureDataset::load(&dataset_path(data_dir, config.task), &config)?;
        Self::with_train(config, train.records, exp)
    }

    /// Collects both failure sets in memory.
    pub fn generate(config: TaskConfig, exp: &ExperimentConfig) -> Result<Self> {
        let train = discover_failures(
            &config,
            exp.max_discovery_episodes,
            0,
            Some(exp.train_failures),
        )?;
        Self::with_train(config, train.records, exp)
    }

    fn with_train(
        config: TaskConfig,
        train: Vec<FailureRecord>,
        exp: &ExperimentConfig,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let held_out = discover_failures(
            &config,
            exp.max_discovery_episodes,
            HELD_OUT_SEED_BASE,
            Some(exp.eval_failures),
        )?;
        if held_out.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            config,
            train: Arc::new(train),
            held_out,
        })
    }

    /// Overall task success (percent) when `recovered` of the held-out
    /// failures are recovered.
    pub fn overall_success(&self, recovered: usize) -> f64 {
        let h = &self.held_out.header;
        100.0 * (h.nominal_successes as f64 + recovered as f64) / h.episodes_run as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub timesteps: u64,
    pub mean_reward: f64,
    /// Actual recovery rate of the greedy policy on the curve records.
    pub recovery_rate: f64,
    /// Cumulative simulation steps spent inside nominal-option rollouts.
    pub sim_steps_cumulative: u64,
    /// Share of option invocations since the previous row answered lazily.
    pub lazy_hit_rate: f64,
}

/// One training run and its final held-out evaluation.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub method: Method,
    pub task: TaskKind,
    pub seed: u64,
    /// Label used in file names; the PP ablation appends the dataset size.
    pub label: String,
    /// Overall task success on the held-out episodes, percent.
    pub success_rate: f64,
    /// Held-out episodes ending at the goal, nominally or after recovery.
    pub successes: u64,
    pub episodes: u64,
    /// Fraction of held-out failures recovered.
    pub recovery_rate: f64,
    pub sim_steps: u64,
    pub curve: Vec<CurvePoint>,
    /// Option invocation counts per 120-action round.
    pub option_rounds: Vec<Vec<u32>>,
    pub audit: Option<Audit>,
    pub policy: Option<PolicyNetwork>,
    pub wall_time: Duration,
}

impl RunResult {
    pub fn final_curve(&self) -> Option<&CurvePoint> {
        self.curve.last()
    }
}

/// A single (task, method, seed) job; `pp_dataset_size` only matters for PP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub task: TaskKind,
    pub method: Method,
    pub seed: u64,
    pub pp_dataset_size: usize,
    /// Marks PP ablation runs, whose labels carry the dataset size.
    pub ablation: bool,
}

impl Job {
    pub fn label(&self) -> String {
        if self.ablation {
            format!("{}-n{}", self.method.name(), self.pp_dataset_size)
        } else {
            self.method.name().to_string()
        }
    }
}

fn execution<'a>(method: Method, pp: Option<&'a PpModel>) -> Execution<'a> {
    match (method, pp) {
        (Method::Rc | Method::LazyRc, _) => Execution::Options,
        (Method::Pp, Some(m)) => Execution::Pretrained(m),
        _ => Execution::PrimitivesOnly,
    }
}

fn build_env(data: &TaskData, job: &Job) -> Result<(RcEnv, Option<Arc<PpModel>>)> {
    let cfg = data.config.clone();
    let env_seed = seeding::derive_seed(job.seed, "rc-env");
    let records = Arc::clone(&data.train);
    Ok(match job.method {
        Method::Rc => (RcEnv::new(cfg, records, Variant::Rc, env_seed)?, None),
        Method::LazyRc => {
            let gate = LazyGate::new(
                skills::plan(cfg.task).len(),
                seeding::derive_seed(job.seed, "lazy-gate"),
            );
            (
                RcEnv::new(cfg, records, Variant::Lazy(Box::new(gate)), env_seed)?,
                None,
            )
        }
        Method::Pp => {
            let model = Arc::new(PpModel::train(
                &cfg,
                job.pp_dataset_size,
                seeding::derive_seed(job.seed, "pp-model"),
            )?);
            (
                pp_env(cfg, records, Arc::clone(&model), env_seed)?,
                Some(model),
            )
        }
        Method::Rlr => (rlr_env(cfg, records, env_seed)?, None),
        Method::Nominal => return Err(Error::Config("the nominal plan is not trained".into())),
    })
}

fn count_recovered(data: &TaskData, net: &PolicyNetwork, exec: Execution<'_>) -> Result<usize> {
    let rate = recovery_rate(&data.config, net, &data.held_out.records, exec)?;
    Ok((rate * data.held_out.len() as f64).round() as usize)
}

/// Trains and evaluates one job.
pub fn run_job(data: &TaskData, job: &Job, exp: &ExperimentConfig) -> Result<RunResult> {
    let start = Instant::now();
    let mut result = RunResult {
        method: job.method,
        task: job.task,
        seed: job.seed,
        label: job.label(),
        success_rate: data.overall_success(0),
        successes: data.held_out.header.nominal_successes,
        episodes: data.held_out.header.episodes_run,
        recovery_rate: 0.0,
        sim_steps: 0,
        curve: Vec::new(),
        option_rounds: Vec::new(),
        audit: None,
        policy: None,
        wall_time: Duration::ZERO,
    };
    if job.method == Method::Nominal {
        result.wall_time = start.elapsed();
        return Ok(result);
    }
    let (mut env, pp) = build_env(data, job)?;
    let curve_records = &data.held_out.records[..exp.curve_records.min(data.held_out.len())];
    let num_options = skills::plan(job.task).len();
    let ppo_cfg = PpoConfig {
        seed: job.seed,
        ..exp.ppo.clone()
    };
    let updates = ppo_cfg.updates();
    let mut curve = Vec::new();
    let mut rounds = Vec::new();
    let mut last_logged = (0u64, 0u64);
    let mut sim_steps = 0;
    let net = ppo::train(&mut env, &ppo_cfg, |net, log: &UpdateLog| {
        if job.method.uses_options() {
            let mut counts = log.option_counts.clone();
            counts.resize(num_options, 0);
            rounds.push(counts);
        }
        sim_steps = log.rollout_steps_cumulative;
        if log.update.is_multiple_of(exp.curve_every) || log.update == updates {
            let exec = execution(job.method, pp.as_deref());
            let invocations = log.option_invocations - last_logged.0;
            let lazy = log.lazy_positives - last_logged.1;
            last_logged = (log.option_invocations, log.lazy_positives);
            curve.push(CurvePoint {
                timesteps: log.timesteps as u64,
                mean_reward: log.mean_reward,
                recovery_rate: recovery_rate(&data.config, net, curve_records, exec)?,
                sim_steps_cumulative: log.rollout_steps_cumulative,
                lazy_hit_rate: if invocations == 0 {
                    0.0
                } else {
                    lazy as f64 / invocations as f64
                },
            });
        }
        Ok(())
    })?;
    let recovered = count_recovered(data, &net, execution(job.method, pp.as_deref()))?;
    result.success_rate = data.overall_success(recovered);
    result.successes += recovered as u64;
    result.recovery_rate = recovered as f64 / data.held_out.len() as f64;
    result.sim_steps = sim_steps;
    result.curve = curve;
    result.option_rounds = rounds;
    result.audit = env.lazy_gate().map(|g| g.audit);
    result.policy = Some(net);
    result.wall_time = start.elapsed();
    Ok(result)
}

/// Runs jobs on up to `threads` workers; results keep the job order.
pub fn run_jobs(
    data: &BTreeMap<TaskKind, TaskData>,
    jobs: &[Job],
    exp: &ExperimentConfig,
    threads: usize,
) -> Result<Vec<RunResult>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunResult>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = threads.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let r = match data.get(&job.task) {
                    Some(d) => run_job(d, job, exp),
                    None => Err(Error::Config(format!(
                        "no data loaded for task {}",
                        job.task
                    ))),
                };
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Aggregate over seeds for one (method, task) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub method: Method,
    pub task: TaskKind,
    pub label: String,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<f64>,
    pub mean_success: f64,
    pub mean_recovery: f64,
    pub mean_sim_steps: f64,
    /// Pooled over seeds.
    pub successes: u64,
    pub episodes: u64,
    pub audit: Audit,
    pub wall_time: Duration,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Groups runs by (label, task) in first-appearance order.
pub fn aggregate(runs: &[RunResult]) -> Vec<ResultsRow> {
    let mut rows: Vec<ResultsRow> = Vec::new();
    for r in runs {
        let i = match rows
            .iter()
            .position(|row| row.label == r.label && row.task == r.task)
        {
            Some(i) => i,
            None => {
                rows.push(ResultsRow {
                    method: r.method,
                    task: r.task,
                    label: r.label.clone(),
                    seeds: Vec::new(),
                    per_seed: Vec::new(),
                    mean_success: 0.0,
                    mean_recovery: 0.0,
                    mean_sim_steps: 0.0,
                    successes: 0,
                    episodes: 0,
                    audit: Audit::default(),
                    wall_time: Duration::ZERO,
                });
                rows.len() - 1
            }
        };
        rows[i].seeds.push(r.seed);
        rows[i].per_seed.push(r.success_rate);
        rows[i].successes += r.successes;
        rows[i].episodes += r.episodes;
        if let Some(a) = r.audit {
            let t = &mut rows[i].audit;
            t.audited += a.audited;
            t.audited_successes += a.audited_successes;
            t.lazy_positives += a.lazy_positives;
            t.queries += a.queries;
        }
        rows[i].wall_time += r.wall_time;
    }
    for row in &mut rows {
        let members: Vec<&RunResult> = runs
            .iter()
            .filter(|r| r.label == row.label && r.task == row.task)
            .collect();
        row.mean_success = mean(row.per_seed.iter().copied());
        row.mean_recovery = mean(members.iter().map(|r| r.recovery_rate));
        row.mean_sim_steps = mean(members.iter().map(|r| r.sim_steps as f64));
    }
    rows
}

/// Comparison jobs: each method on every task and seed. The nominal plan
/// needs no training and runs once per task.
pub fn comparison_jobs(tasks: &[TaskKind], methods: &[Method], exp: &ExperimentConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &task in tasks {
        for &method in methods {
            let seeds: &[u64] = if method == Method::Nominal {
                &exp.seeds[..1]
            } else {
                &exp.seeds
            };
            for &seed in seeds {
                jobs.push(Job {
                    task,
                    method,
                    seed,
                    pp_dataset_size: exp.pp_dataset_size,
                    ablation: false,
                });
            }
        }
    }
    jobs
}

/// PP on pick-place with each offline dataset size, first seed only.
pub fn ablation_jobs(exp: &ExperimentConfig, sizes: &[usize]) -> Vec<Job> {
    sizes
        .iter()
        .map(|&n| Job {
            task: TaskKind::PickPlace2D,
            method: Method::Pp,
            seed: exp.seeds[0],
            pp_dataset_size: n,
            ablation: true,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("foo".parse::<Method>().is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(
            ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(),
            c
        );
        let partial =
            ExperimentConfig::from_toml("seeds = [3]\n[ppo]\ntotal_timesteps = 1200\n").unwrap();
        assert_eq!(partial.seeds, vec![3]);
        assert_eq!(partial.ppo.total_timesteps, 1200);
        assert_eq!(partial.ppo.rollout_steps, 120);
    }

    #[test]
    fn single_seed_row_equals_that_seed() {
        let run = RunResult {
            method: Method::Rc,
            task: TaskKind::Shelf2D,
            seed: 7,
            label: "rc".into(),
            success_rate: 81.25,
            successes: 13,
            episodes: 16,
            recovery_rate: 0.5,
            sim_steps: 10,
            curve: Vec::new(),
            option_rounds: Vec::new(),
            audit: None,
            policy: None,
            wall_time: Duration::ZERO,
        };
        let rows = aggregate(&[run]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_success, 81.25);
        assert_eq!(rows[0].per_seed, vec![81.25]);
    }
}
