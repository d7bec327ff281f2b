use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use rechain::baselines::PP_DATASET_SIZES;
use rechain::discovery::{discover_failures, DEFAULT_FAILURE_TARGET};
use rechain::harness::calibrate::{self, CALIBRATION_EPISODES, TARGET_RATE, TOLERANCE};
use rechain::harness::{self, criteria, export, ExperimentConfig, Method, TaskData};
use rechain::sim::{TaskConfig, TaskKind};

#[derive(Parser)]
#[command(
    name = "rechain",
    version,
    about = "Recovery policies over primitives and nominal options"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the pick-place wall margin against the nominal success target.
    Calibrate {
        #[arg(long, default_value_t = CALIBRATION_EPISODES)]
        episodes: u64,
        #[arg(long, default_value_t = 0.06)]
        max_margin: f64,
        #[arg(long, default_value_t = 24)]
        steps: usize,
        /// Write a pick-place config with the selected margin.
        #[arg(long)]
        write_config: Option<PathBuf>,
    },
    /// Run the nominal plan and record its failures.
    Discover {
        #[arg(long)]
        task: TaskKind,
        #[arg(long, default_value_t = 5000)]
        episodes: u64,
        /// Stop after this many failures.
        #[arg(long, default_value_t = DEFAULT_FAILURE_TARGET)]
        target: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        task_config: Option<PathBuf>,
    },
    /// Train and evaluate every method, then export tables and plots.
    Train(TrainArgs),
    /// Check the acceptance criteria on an output directory.
    Evaluate {
        #[arg(long, default_value = "results")]
        dir: PathBuf,
        /// Exit nonzero when any check fails.
        #[arg(long)]
        assert: bool,
    },
    /// PP with one or more offline dataset sizes on pick-place.
    AblatePp {
        #[arg(long = "pp-dataset-size", value_parser = parse_pp_size)]
        sizes: Vec<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Re-render every SVG from the CSVs in a directory.
    ExportPlots {
        #[arg(long, default_value = "results")]
        dir: PathBuf,
    },
    /// Print the effective configuration as TOML.
    ShowConfig {
        #[arg(long)]
        task: Option<TaskKind>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        paper_scale: bool,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Experiment TOML; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task TOML files replacing the default geometry of their task.
    #[arg(long)]
    task_config: Vec<PathBuf>,
    /// Directory holding `failures_<task>.jsonl`; collected in memory if absent.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    timesteps: Option<usize>,
    /// Hidden layers [256, 256] and 500k timesteps.
    #[arg(long, conflicts_with = "paper_scale_200k")]
    paper_scale: bool,
    /// Hidden layers [256, 256] and 200k timesteps.
    #[arg(long)]
    paper_scale_200k: bool,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<TaskKind>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    no_ablation: bool,
}

fn parse_pp_size(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if PP_DATASET_SIZES.contains(&n) {
        Ok(n)
    } else {
        Err(format!("dataset size must be one of {PP_DATASET_SIZES:?}"))
    }
}

impl CommonArgs {
    fn experiment(&self) -> anyhow::Result<ExperimentConfig> {
        let mut exp = match &self.config {
            Some(p) => ExperimentConfig::from_toml(
                &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            )?,
            None => ExperimentConfig::default(),
        };
        if self.paper_scale {
            exp = exp.paper_scale();
        }
        if self.paper_scale_200k {
            exp = exp.paper_scale_200k();
        }
        if let Some(s) = &self.seeds {
            exp.seeds = s.clone();
        }
        if let Some(t) = self.timesteps {
            exp.ppo.total_timesteps = t;
        }
        exp.validate()?;
        Ok(exp)
    }

    fn task_config(&self, task: TaskKind) -> anyhow::Result<TaskConfig> {
        for p in &self.task_config {
            let c = TaskConfig::load(p).with_context(|| format!("loading {}", p.display()))?;
            if c.task == task {
                return Ok(c);
            }
        }
        Ok(TaskConfig::new(task))
    }

    fn threads(&self) -> usize {
        self.threads.unwrap_or_else(harness::default_threads)
    }
}

fn print_checks(checks: &[criteria::Check]) -> bool {
    for c in checks {
        println!("{c}");
    }
    checks.iter().all(|c| c.passed)
}

fn evaluate(dir: &Path) -> anyhow::Result<bool> {
    let mut checks = vec![criteria::nominal_calibration(&TaskConfig::new(
        TaskKind::PickPlace2D,
    ))?];
    checks.extend(criteria::check_outputs(dir)?);
    Ok(print_checks(&checks))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Calibrate {
            episodes,
            max_margin,
            steps,
            write_config,
        } => {
            let base = TaskConfig::new(TaskKind::PickPlace2D);
            let margins = calibrate::margin_grid(max_margin, steps);
            let report = calibrate::calibrate(&base, &margins, episodes, TARGET_RATE, TOLERANCE)?;
            println!("wall_margin,success_rate");
            for r in &report.sweep {
                println!("{:.4},{:.3}", r.wall_margin, r.success_rate);
            }
            let Some(sel) = report.selected else {
                bail!("no margin reaches {TARGET_RATE} +/- {TOLERANCE}");
            };
            println!(
                "selected wall_margin {:.4} (success {:.3})",
                sel.wall_margin, sel.success_rate
            );
            if let Some(path) = write_config {
                let mut cfg = base;
                cfg.pick_place.wall_margin = sel.wall_margin;
                std::fs::write(&path, cfg.to_toml())?;
                println!("wrote {}", path.display());
            }
        }
        Command::Discover {
            task,
            episodes,
            target,
            out,
            task_config,
        } => {
            let cfg = match task_config {
                Some(p) => TaskConfig::load(&p)?,
                None => TaskConfig::new(task),
            };
            if cfg.task != task {
                bail!("task config is for {}, not {}", cfg.task, task);
            }
            let ds = discover_failures(&cfg, episodes, 0, Some(target))?;
            ds.save(&out)?;
            println!(
                "{}: {} failures in {} episodes ({:.1}% nominal success) -> {}",
                task,
                ds.len(),
                ds.header.episodes_run,
                100.0 * ds.nominal_rate(),
                out.display()
            );
        }
        Command::Train(args) => {
            let exp = args.common.experiment()?;
            let tasks = args.tasks.unwrap_or_else(|| TaskKind::ALL.to_vec());
            let methods = args.methods.unwrap_or_else(|| Method::ALL.to_vec());
            let configs = tasks
                .iter()
                .map(|&t| args.common.task_config(t))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let start = Instant::now();
            let data = harness::load_tasks(&configs, &exp, args.common.data_dir.as_deref())?;
            let out = harness::run_all(
                &args.common.out,
                &data,
                &methods,
                &exp,
                !args.no_ablation,
                args.common.threads(),
            )?;
            for r in &out.rows {
                println!(
                    "{:<10} {:<16} success {:6.2}%  recovery {:.3}",
                    r.label,
                    r.task.name(),
                    r.mean_success,
                    r.mean_recovery
                );
            }
            println!(
                "wrote {} in {:.0}s",
                args.common.out.display(),
                start.elapsed().as_secs_f64()
            );
        }
        Command::Evaluate { dir, assert } => {
            let ok = evaluate(&dir)?;
            if assert && !ok {
                return Ok(false);
            }
        }
        Command::AblatePp { sizes, common } => {
            let exp = common.experiment()?;
            let sizes = if sizes.is_empty() {
                PP_DATASET_SIZES.to_vec()
            } else {
                sizes
            };
            let cfg = common.task_config(TaskKind::PickPlace2D)?;
            let data = match &common.data_dir {
                Some(d) => TaskData::load(cfg, d, &exp)?,
                None => TaskData::generate(cfg, &exp)?,
            };
            for r in harness::run_ablation(&common.out, &data, &exp, &sizes, common.threads())? {
                let reward = r.final_curve().map_or(0.0, |c| c.mean_reward);
                println!(
                    "{:<8} training reward {:.3}  actual recovery {:.3}",
                    r.label, reward, r.recovery_rate
                );
            }
        }
        Command::ExportPlots { dir } => {
            for p in export::render_plots(&dir)? {
                println!("{}", p.display());
            }
        }
        Command::ShowConfig {
            task,
            config,
            paper_scale,
        } => {
            let mut exp = match config {
                Some(p) => ExperimentConfig::from_toml(&std::fs::read_to_string(p)?)?,
                None => ExperimentConfig::default(),
            };
            if paper_scale {
                exp = exp.paper_scale();
            }
            print!("{}", exp.to_toml()?);
            for t in task.map_or_else(|| TaskKind::ALL.to_vec(), |t| vec![t]) {
                println!("\n# task {t}\n{}", TaskConfig::new(t).to_toml());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
