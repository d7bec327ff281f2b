//! Pass/fail checks over an experiment output directory.

use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use super::calibrate::CALIBRATION_EPISODES;
use super::export::{self, AblationRecord, ResultsRecord, UsageRecord};
use super::initiation::{near_wall_share, FailurePoint, FINGER_WIDTH};
use crate::discovery::nominal_stats;
use crate::error::Result;
use crate::sim::{TaskConfig, TaskKind};

pub const NOMINAL_RANGE: (f64, f64) = (0.65, 0.75);
pub const NOMINAL_TIME_LIMIT: Duration = Duration::from_secs(60);
pub const RC_GAIN_POINTS: f64 = 10.0;
pub const RLR_GAP_POINTS: f64 = 15.0;
pub const LAZY_STEP_SAVING: f64 = 0.30;
pub const LAZY_SUCCESS_POINTS: f64 = 5.0;
pub const AUDIT_PRECISION: f64 = 0.90;
pub const PP_GAP: f64 = 0.10;
pub const OPTION_SHARE: f64 = 0.80;
pub const FINAL_ROUND_FRACTION: f64 = 0.10;
pub const NEAR_WALL_SHARE: f64 = 0.90;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(id: u8, name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            id,
            name,
            passed,
            detail,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

/// Nominal pick-place success over the calibration seeds, timed.
pub fn nominal_calibration(cfg: &TaskConfig) -> Result<Check> {
    let start = Instant::now();
    let st = nominal_stats(cfg, 0..CALIBRATION_EPISODES)?;
    let elapsed = start.elapsed();
    let rate = st.success_rate();
    let passed =
        (NOMINAL_RANGE.0..=NOMINAL_RANGE.1).contains(&rate) && elapsed < NOMINAL_TIME_LIMIT;
    Ok(Check::new(
        1,
        "nominal calibration",
        passed,
        format!(
            "{:.1}% over {} seeds in {:.1}s",
            100.0 * rate,
            st.episodes,
            elapsed.as_secs_f64()
        ),
    ))
}

fn find<'a>(rows: &'a [ResultsRecord], label: &str, task: TaskKind) -> Option<&'a ResultsRecord> {
    rows.iter()
        .find(|r| r.label == label && r.task == task.name())
}

fn missing(id: u8, name: &'static str, what: &str) -> Check {
    Check::new(id, name, false, format!("missing {what}"))
}

pub fn rc_improvement(rows: &[ResultsRecord]) -> Check {
    let name = "rc improves on nominal";
    let t = TaskKind::PickPlace2D;
    match (find(rows, "rc", t), find(rows, "nominal", t)) {
        (Some(rc), Some(nom)) => Check::new(
            2,
            name,
            rc.success_mean >= nom.success_mean + RC_GAIN_POINTS,
            format!(
                "rc {:.1}% vs nominal {:.1}% over seeds {}",
                rc.success_mean, nom.success_mean, rc.seeds
            ),
        ),
        _ => missing(2, name, "rc or nominal row for pick-place"),
    }
}

pub fn method_ordering(rows: &[ResultsRecord]) -> Check {
    let name = "method ordering";
    let mut passed = true;
    let mut parts = Vec::new();
    for t in TaskKind::ALL {
        let (Some(rc), Some(pp), Some(rlr)) = (
            find(rows, "rc", t),
            find(rows, "pp", t),
            find(rows, "rlr", t),
        ) else {
            return missing(3, name, &format!("rc, pp or rlr row for {t}"));
        };
        let ok = rc.success_mean >= pp.success_mean
            && rc.success_mean >= rlr.success_mean
            && rc.success_mean - rlr.success_mean >= RLR_GAP_POINTS;
        passed &= ok;
        parts.push(format!(
            "{}: rc {:.1} pp {:.1} rlr {:.1}",
            t.name(),
            rc.success_mean,
            pp.success_mean,
            rlr.success_mean
        ));
    }
    Check::new(3, name, passed, parts.join("; "))
}

pub fn lazy_efficiency(rows: &[ResultsRecord]) -> Check {
    let name = "lazy rc efficiency";
    let mut passed = true;
    let mut parts = Vec::new();
    for t in TaskKind::ALL {
        let (Some(rc), Some(lazy)) = (find(rows, "rc", t), find(rows, "lazy_rc", t)) else {
            continue;
        };
        let saving = 1.0 - lazy.sim_steps_mean / rc.sim_steps_mean.max(1.0);
        let gap = (rc.success_mean - lazy.success_mean).abs();
        passed &= saving >= LAZY_STEP_SAVING && gap <= LAZY_SUCCESS_POINTS;
        parts.push(format!(
            "{}: {:.0}% fewer steps, success gap {:.1}",
            t.name(),
            100.0 * saving,
            gap
        ));
    }
    if parts.is_empty() {
        return missing(4, name, "rc and lazy_rc rows");
    }
    Check::new(4, name, passed, parts.join("; "))
}

pub fn lazy_soundness(rows: &[ResultsRecord]) -> Check {
    let name = "lazy audit precision";
    let lazy: Vec<&ResultsRecord> = rows.iter().filter(|r| r.label == "lazy_rc").collect();
    let audited: u64 = lazy.iter().map(|r| r.audited).sum();
    let ok: u64 = lazy.iter().map(|r| r.audited_successes).sum();
    if audited == 0 {
        return missing(5, name, "audited lazy positives");
    }
    let p = ok as f64 / audited as f64;
    Check::new(
        5,
        name,
        p >= AUDIT_PRECISION,
        format!("{ok}/{audited} audits succeeded ({p:.4})"),
    )
}

pub fn pp_ablation(rows: &[ResultsRecord], ablation: &[AblationRecord]) -> Check {
    let name = "pp ablation gap";
    let Some(rc) = find(rows, "rc", TaskKind::PickPlace2D) else {
        return missing(6, name, "rc row for pick-place");
    };
    if ablation.is_empty() {
        return missing(6, name, "pp ablation rows");
    }
    let best = ablation
        .iter()
        .map(|a| a.recovery_rate)
        .fold(f64::NEG_INFINITY, f64::max);
    let sizes: Vec<String> = ablation
        .iter()
        .map(|a| format!("n={} {:.3}", a.dataset_size, a.recovery_rate))
        .collect();
    Check::new(
        6,
        name,
        best <= rc.recovery_mean - PP_GAP,
        format!(
            "pp recovery [{}] vs rc {:.3}",
            sizes.join(", "),
            rc.recovery_mean
        ),
    )
}

pub fn option_commitment(usage: &[UsageRecord]) -> Check {
    let name = "option commitment";
    let shares = export::final_option_shares(usage, FINAL_ROUND_FRACTION);
    let Some(counts) = shares.get(&(TaskKind::PickPlace2D.name().to_string(), "rc".to_string()))
    else {
        return missing(7, name, "rc option usage on pick-place");
    };
    let total: u64 = counts.iter().sum();
    let (best, top) = counts
        .iter()
        .enumerate()
        .max_by_key(|&(i, &c)| (c, std::cmp::Reverse(i)))
        .map_or((0, 0), |(i, &c)| (i + 1, c));
    let share = if total == 0 {
        0.0
    } else {
        top as f64 / total as f64
    };
    Check::new(
        7,
        name,
        share >= OPTION_SHARE,
        format!("option {best} takes {top}/{total} ({share:.3}) of final-round invocations"),
    )
}

pub fn failure_concentration(points: &[FailurePoint]) -> Check {
    let name = "failures near top/bottom walls";
    if points.is_empty() {
        return missing(8, name, "pick-place failure scatter");
    }
    let share = near_wall_share(points);
    Check::new(
        8,
        name,
        share >= NEAR_WALL_SHARE,
        format!(
            "{:.1}% of {} failures within {FINGER_WIDTH} of the top or bottom wall",
            100.0 * share,
            points.len()
        ),
    )
}

fn load_or_empty<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if path.exists() {
        export::read_csv(path)
    } else {
        Ok(Vec::new())
    }
}

/// Checks 2 to 8 on the CSV files in `dir`; missing files fail their check.
pub fn check_outputs(dir: &Path) -> Result<Vec<Check>> {
    let rows: Vec<ResultsRecord> = load_or_empty(&dir.join(export::RESULTS_TABLE))?;
    let ablation: Vec<AblationRecord> = load_or_empty(&dir.join(export::PP_ABLATION))?;
    let usage: Vec<UsageRecord> = load_or_empty(&dir.join(export::OPTION_USAGE))?;
    let failures: Vec<FailurePoint> =
        load_or_empty(&export::failure_scatter_path(dir, TaskKind::PickPlace2D))?;
    Ok(vec![
        rc_improvement(&rows),
        method_ordering(&rows),
        lazy_efficiency(&rows),
        lazy_soundness(&rows),
        pp_ablation(&rows, &ablation),
        option_commitment(&usage),
        failure_concentration(&failures),
    ])
}
