//! CSV artifacts and the SVG plots rendered from them.
//!
//! Every plot is drawn from the CSV files on disk, so `export-plots` can
//! regenerate figures for any output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::experiment::{aggregate, CurvePoint, Method, ResultsRow, RunResult};
use super::initiation::{FailurePoint, GridPoint};
use super::svg::{self, Series};
use crate::error::{Error, Result};
use crate::sim::TaskKind;
use crate::skills;

pub const RESULTS_TABLE: &str = "results_table.csv";
pub const TIMING: &str = "timing.csv";
pub const OPTION_USAGE: &str = "option_usage.csv";
pub const PP_ABLATION: &str = "pp_ablation.csv";
pub const CURVES_DIR: &str = "curves";

/// One row of `results_table.csv`. Lists hold one value per seed, joined
/// with `;`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRecord {
    pub method: String,
    pub task: String,
    pub label: String,
    pub seeds: String,
    pub success_mean: f64,
    pub success_per_seed: String,
    /// Wilson 95% interval on the pooled held-out episodes, percent.
    pub success_ci_low: f64,
    pub success_ci_high: f64,
    pub recovery_mean: f64,
    pub sim_steps_mean: f64,
    pub audited: u64,
    pub audited_successes: u64,
    pub lazy_positives: u64,
}

impl ResultsRecord {
    pub fn per_seed(&self) -> Result<Vec<f64>> {
        split_list(&self.success_per_seed)
    }

    pub fn method(&self) -> Result<Method> {
        self.method.parse()
    }

    pub fn task(&self) -> Result<TaskKind> {
        self.task.parse()
    }
}

fn split_list(s: &str) -> Result<Vec<f64>> {
    s.split(';')
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad list entry '{x}': {e}")))
        })
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

/// Wilson score interval for `k` successes in `n` trials at z = 1.96.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let (n, p) = (n as f64, k as f64 / n as f64);
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

impl From<&ResultsRow> for ResultsRecord {
    fn from(r: &ResultsRow) -> Self {
        let (lo, hi) = wilson_interval(r.successes, r.episodes);
        Self {
            method: r.method.name().to_string(),
            task: r.task.name().to_string(),
            label: r.label.clone(),
            seeds: join(&r.seeds),
            success_mean: r.mean_success,
            success_per_seed: join(&r.per_seed),
            success_ci_low: 100.0 * lo,
            success_ci_high: 100.0 * hi,
            recovery_mean: r.mean_recovery,
            sim_steps_mean: r.mean_sim_steps,
            audited: r.audit.audited,
            audited_successes: r.audit.audited_successes,
            lazy_positives: r.audit.lazy_positives,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub label: String,
    pub task: String,
    pub wall_time_s: f64,
}

/// Long-format option histogram: one row per (run, round, option).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub task: String,
    pub method: String,
    pub seed: u64,
    pub round: usize,
    pub option: usize,
    pub option_name: String,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRecord {
    pub dataset_size: usize,
    pub seed: u64,
    /// Mean training reward over the last finished episodes.
    pub final_mean_reward: f64,
    pub recovery_rate: f64,
    pub success_rate: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::Config(format!("{} not found", path.display())));
    }
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|x| x.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

pub fn curve_path(dir: &Path, label: &str, task: TaskKind, seed: u64) -> PathBuf {
    dir.join(CURVES_DIR)
        .join(format!("{label}_{}_{seed}.csv", task.name()))
}

pub fn initiation_path(dir: &Path, skill: &str) -> PathBuf {
    dir.join(format!("initiation_set_{skill}.csv"))
}

pub fn failure_scatter_path(dir: &Path, task: TaskKind) -> PathBuf {
    dir.join(format!("failure_scatter_{}.csv", task.name()))
}

fn usage_records(runs: &[RunResult]) -> Vec<UsageRecord> {
    let mut out = Vec::new();
    for r in runs.iter().filter(|r| r.method.uses_options()) {
        let plan = skills::plan(r.task);
        for (round, counts) in r.option_rounds.iter().enumerate() {
            for (k, &count) in counts.iter().enumerate() {
                out.push(UsageRecord {
                    task: r.task.name().to_string(),
                    method: r.method.name().to_string(),
                    seed: r.seed,
                    round: round + 1,
                    option: k + 1,
                    option_name: plan[k].name().to_string(),
                    count,
                });
            }
        }
    }
    out
}

/// Writes the results table, timing, curves and option usage of the main
/// comparison.
pub fn write_comparison(dir: &Path, runs: &[RunResult]) -> Result<Vec<ResultsRow>> {
    fs::create_dir_all(dir)?;
    let rows = aggregate(runs);
    write_csv(
        &dir.join(RESULTS_TABLE),
        &rows.iter().map(ResultsRecord::from).collect::<Vec<_>>(),
    )?;
    let timing: Vec<TimingRecord> = rows
        .iter()
        .map(|r| TimingRecord {
            label: r.label.clone(),
            task: r.task.name().to_string(),
            wall_time_s: r.wall_time.as_secs_f64(),
        })
        .collect();
    write_csv(&dir.join(TIMING), &timing)?;
    write_curves(dir, runs)?;
    write_csv(&dir.join(OPTION_USAGE), &usage_records(runs))?;
    Ok(rows)
}

pub const CHECKPOINTS_DIR: &str = "checkpoints";

pub fn checkpoint_path(dir: &Path, label: &str, task: TaskKind, seed: u64) -> PathBuf {
    dir.join(CHECKPOINTS_DIR)
        .join(format!("{label}_{}_{seed}.json", task.name()))
}

/// Learning curves plus the final policy of every trained run.
pub fn write_curves(dir: &Path, runs: &[RunResult]) -> Result<()> {
    for r in runs.iter().filter(|r| r.method != Method::Nominal) {
        write_csv(&curve_path(dir, &r.label, r.task, r.seed), &r.curve)?;
        if let Some(net) = &r.policy {
            net.save(&checkpoint_path(dir, &r.label, r.task, r.seed))?;
        }
    }
    Ok(())
}

/// Writes `pp_ablation.csv` and the per-size curves.
pub fn write_ablation(dir: &Path, runs: &[RunResult], dataset_sizes: &[usize]) -> Result<()> {
    let rows: Vec<AblationRecord> = runs
        .iter()
        .zip(dataset_sizes)
        .map(|(r, &n)| AblationRecord {
            dataset_size: n,
            seed: r.seed,
            final_mean_reward: r.final_curve().map_or(0.0, |c| c.mean_reward),
            recovery_rate: r.recovery_rate,
            success_rate: r.success_rate,
        })
        .collect();
    write_csv(&dir.join(PP_ABLATION), &rows)?;
    write_curves(dir, runs)
}

fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    read_csv(path)
}

/// Mean curve over files sharing a label and task, aligned by row.
fn mean_curve(files: &[PathBuf], column: impl Fn(&CurvePoint) -> f64) -> Result<Vec<(f64, f64)>> {
    let curves: Vec<Vec<CurvePoint>> =
        files.iter().map(|f| read_curve(f)).collect::<Result<_>>()?;
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    Ok((0..len)
        .map(|i| {
            let x = curves[0][i].timesteps as f64;
            let y = curves.iter().map(|c| column(&c[i])).sum::<f64>() / curves.len() as f64;
            (x, y)
        })
        .collect())
}

/// Curve files grouped by (task, label), sorted for stable output.
fn curve_groups(dir: &Path) -> Result<BTreeMap<(String, String), Vec<PathBuf>>> {
    let mut groups: BTreeMap<(String, String), Vec<PathBuf>> = BTreeMap::new();
    let curves = dir.join(CURVES_DIR);
    if !curves.exists() {
        return Ok(groups);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(&curves)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
    {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let parts: Vec<&str> = stem.rsplitn(3, '_').collect();
        if let [_, task, label] = parts[..] {
            groups
                .entry((task.to_string(), label.to_string()))
                .or_default()
                .push(path);
        }
    }
    Ok(groups)
}

fn write_svg(path: &Path, body: String) -> Result<()> {
    fs::write(path, body)?;
    Ok(())
}

/// Final-rounds option shares of every option-using run, keyed by
/// (task, method) and pooled over seeds.
pub fn final_option_shares(
    usage: &[UsageRecord],
    fraction: f64,
) -> BTreeMap<(String, String), Vec<u64>> {
    let mut last_round: BTreeMap<(String, String, u64), usize> = BTreeMap::new();
    for u in usage {
        let e = last_round
            .entry((u.task.clone(), u.method.clone(), u.seed))
            .or_default();
        *e = (*e).max(u.round);
    }
    let mut out: BTreeMap<(String, String), Vec<u64>> = BTreeMap::new();
    for u in usage {
        let total = last_round[&(u.task.clone(), u.method.clone(), u.seed)];
        let first = total - ((total as f64 * fraction).ceil() as usize).max(1) + 1;
        if u.round < first {
            continue;
        }
        let counts = out.entry((u.task.clone(), u.method.clone())).or_default();
        if counts.len() < u.option {
            counts.resize(u.option, 0);
        }
        counts[u.option - 1] += u64::from(u.count);
    }
    out
}

/// Renders every plot whose CSV exists in `dir`. Returns the written paths.
pub fn render_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let results = dir.join(RESULTS_TABLE);
    if results.exists() {
        let rows: Vec<ResultsRecord> = read_csv(&results)?;
        let mut tasks: Vec<String> = Vec::new();
        let mut labels: Vec<String> = Vec::new();
        for r in &rows {
            if !tasks.contains(&r.task) {
                tasks.push(r.task.clone());
            }
            if !labels.contains(&r.label) {
                labels.push(r.label.clone());
            }
        }
        let series: Vec<(String, Vec<f64>)> = labels
            .iter()
            .map(|l| {
                let v = tasks
                    .iter()
                    .map(|t| {
                        rows.iter()
                            .find(|r| &r.label == l && &r.task == t)
                            .map_or(0.0, |r| r.success_mean)
                    })
                    .collect();
                (l.clone(), v)
            })
            .collect();
        let path = results.with_extension("svg");
        write_svg(
            &path,
            svg::bar_chart("Overall success rate", "success %", &tasks, &series),
        )?;
        written.push(path);
    }

    let groups = curve_groups(dir)?;
    for (key, files) in &groups {
        let (task, label) = key;
        for file in files {
            let points = read_curve(file)?;
            let series = [
                Series {
                    label: "recovery rate".into(),
                    points: points
                        .iter()
                        .map(|p| (p.timesteps as f64, p.recovery_rate))
                        .collect(),
                },
                Series {
                    label: "mean reward".into(),
                    points: points
                        .iter()
                        .map(|p| (p.timesteps as f64, p.mean_reward))
                        .collect(),
                },
            ];
            let path = file.with_extension("svg");
            let title = format!("{label} on {task}");
            write_svg(
                &path,
                svg::line_chart(&title, "timesteps", "rate", &series, Some((0.0, 1.0))),
            )?;
            written.push(path);
        }
    }
    let tasks: Vec<String> = groups
        .keys()
        .map(|k| k.0.clone())
        .fold(Vec::new(), |mut v, t| {
            if !v.contains(&t) {
                v.push(t);
            }
            v
        });
    for task in &tasks {
        let mut recovery = Vec::new();
        let mut steps = Vec::new();
        for ((t, label), files) in &groups {
            if t != task {
                continue;
            }
            recovery.push(Series {
                label: label.clone(),
                points: mean_curve(files, |p| p.recovery_rate)?,
            });
            steps.push(Series {
                label: label.clone(),
                points: mean_curve(files, |p| p.sim_steps_cumulative as f64)?,
            });
        }
        let path = dir.join(CURVES_DIR).join(format!("recovery_{task}.svg"));
        write_svg(
            &path,
            svg::line_chart(
                &format!("Recovery rate on {task}"),
                "timesteps",
                "recovery rate",
                &recovery,
                Some((0.0, 1.0)),
            ),
        )?;
        written.push(path);
        let path = dir.join(CURVES_DIR).join(format!("sim_steps_{task}.svg"));
        write_svg(
            &path,
            svg::line_chart(
                &format!("Option rollout steps on {task}"),
                "timesteps",
                "simulation steps",
                &steps,
                None,
            ),
        )?;
        written.push(path);
    }

    let usage_path = dir.join(OPTION_USAGE);
    if usage_path.exists() {
        let usage: Vec<UsageRecord> = read_csv(&usage_path)?;
        let mut per_round: BTreeMap<(String, String), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
        let mut names: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
        let mut seeds: BTreeMap<(String, String), Vec<u64>> = BTreeMap::new();
        for u in &usage {
            let key = (u.task.clone(), u.method.clone());
            let rounds = per_round
                .entry(key.clone())
                .or_default()
                .entry(u.round)
                .or_default();
            if rounds.len() < u.option {
                rounds.resize(u.option, 0.0);
            }
            rounds[u.option - 1] += f64::from(u.count);
            let n = names.entry(key.clone()).or_default();
            if n.len() < u.option {
                n.resize(u.option, String::new());
            }
            n[u.option - 1] = u.option_name.clone();
            let s = seeds.entry(key).or_default();
            if !s.contains(&u.seed) {
                s.push(u.seed);
            }
        }
        for (key, rounds) in &per_round {
            let n_seeds = seeds[key].len() as f64;
            let series: Vec<Series> = names[key]
                .iter()
                .enumerate()
                .map(|(k, name)| Series {
                    label: name.clone(),
                    points: rounds
                        .iter()
                        .map(|(&r, c)| (r as f64, c.get(k).copied().unwrap_or(0.0) / n_seeds))
                        .collect(),
                })
                .collect();
            let path = dir.join(format!("option_usage_{}_{}.svg", key.1, key.0));
            let title = format!("Options per 120-action round, {} on {}", key.1, key.0);
            write_svg(
                &path,
                svg::line_chart(&title, "round", "invocations", &series, None),
            )?;
            written.push(path);
        }
        let shares = final_option_shares(&usage, 0.1);
        let categories: Vec<String> = shares.keys().map(|(t, m)| format!("{m}/{t}")).collect();
        let width = shares.values().map(Vec::len).max().unwrap_or(0);
        let series: Vec<(String, Vec<f64>)> = (0..width)
            .map(|k| {
                let v = shares
                    .values()
                    .map(|c| {
                        let total: u64 = c.iter().sum();
                        if total == 0 {
                            0.0
                        } else {
                            c.get(k).copied().unwrap_or(0) as f64 / total as f64
                        }
                    })
                    .collect();
                (format!("option {}", k + 1), v)
            })
            .collect();
        let path = usage_path.with_extension("svg");
        write_svg(
            &path,
            svg::bar_chart(
                "Option share in the final 10% of rounds",
                "share",
                &categories,
                &series,
            ),
        )?;
        written.push(path);
    }

    let ablation = dir.join(PP_ABLATION);
    if ablation.exists() {
        let rows: Vec<AblationRecord> = read_csv(&ablation)?;
        let categories: Vec<String> = rows
            .iter()
            .map(|r| format!("n={}", r.dataset_size))
            .collect();
        let series = vec![
            (
                "training reward".to_string(),
                rows.iter().map(|r| r.final_mean_reward).collect(),
            ),
            (
                "actual recovery".to_string(),
                rows.iter().map(|r| r.recovery_rate).collect(),
            ),
        ];
        let path = ablation.with_extension("svg");
        write_svg(
            &path,
            svg::bar_chart("PP dataset-size ablation", "rate", &categories, &series),
        )?;
        written.push(path);
    }

    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        let name = path
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        if !name.ends_with(".csv") {
            continue;
        }
        if let Some(skill) = name
            .strip_prefix("initiation_set_")
            .and_then(|s| s.strip_suffix(".csv"))
        {
            let grid: Vec<GridPoint> = read_csv(&path)?;
            let points: Vec<(f64, f64, usize)> = grid
                .iter()
                .map(|g| (g.coord_a, g.coord_b, g.class()))
                .collect();
            let out = path.with_extension("svg");
            write_svg(
                &out,
                svg::scatter(
                    &format!("Initiation set of {skill}"),
                    "a",
                    "b",
                    &points,
                    &GridPoint::CLASSES,
                ),
            )?;
            written.push(out);
        } else if let Some(task) = name
            .strip_prefix("failure_scatter_")
            .and_then(|s| s.strip_suffix(".csv"))
        {
            let pts: Vec<FailurePoint> = read_csv(&path)?;
            let points: Vec<(f64, f64, usize)> = pts
                .iter()
                .map(|p| (p.coord_a, p.coord_b, p.plan_skill_index.saturating_sub(1)))
                .collect();
            let classes: Vec<String> = match task.parse::<TaskKind>() {
                Ok(t) => skills::plan(t)
                    .iter()
                    .map(|s| s.name().to_string())
                    .collect(),
                Err(_) => Vec::new(),
            };
            let classes: Vec<&str> = classes.iter().map(String::as_str).collect();
            let out = path.with_extension("svg");
            write_svg(
                &out,
                svg::scatter(
                    &format!("Nominal failures on {task}"),
                    "a",
                    "b",
                    &points,
                    &classes,
                ),
            )?;
            written.push(out);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_interval_brackets_the_estimate() {
        let (lo, hi) = wilson_interval(70, 100);
        assert!(lo < 0.7 && 0.7 < hi);
        assert!((lo - 0.6041).abs() < 1e-3 && (hi - 0.7810).abs() < 1e-3);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn list_columns_round_trip() {
        let xs = [68.5, 70.0, 71.25];
        assert_eq!(split_list(&join(&xs)).unwrap(), xs.to_vec());
    }

    #[test]
    fn final_shares_use_the_last_tenth_of_rounds() {
        let mut usage = Vec::new();
        for round in 1..=20 {
            for option in 1..=2 {
                let count = if round > 18 { [9, 1][option - 1] } else { 5 };
                usage.push(UsageRecord {
                    task: "pick-place".into(),
                    method: "rc".into(),
                    seed: 0,
                    round,
                    option,
                    option_name: String::new(),
                    count,
                });
            }
        }
        let shares = final_option_shares(&usage, 0.1);
        assert_eq!(
            shares[&("pick-place".to_string(), "rc".to_string())],
            vec![18, 2]
        );
    }
}
