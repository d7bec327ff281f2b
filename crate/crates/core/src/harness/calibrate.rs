use serde::Serialize;

use crate::discovery::nominal_stats;
use crate::error::{Error, Result};
use crate::sim::{TaskConfig, TaskKind};

pub const TARGET_RATE: f64 = 0.70;
pub const TOLERANCE: f64 = 0.05;
pub const CALIBRATION_EPISODES: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginRate {
    pub wall_margin: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub sweep: Vec<MarginRate>,
    /// Entry closest to the target, if any lies within tolerance.
    pub selected: Option<MarginRate>,
}

/// Evenly spaced margins from 0 to `max` inclusive.
pub fn margin_grid(max: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| max * i as f64 / steps.max(1) as f64)
        .collect()
}

/// Nominal pick-place success on seeds `0..episodes` for each margin.
pub fn calibrate(
    base: &TaskConfig,
    margins: &[f64],
    episodes: u64,
    target: f64,
    tolerance: f64,
) -> Result<CalibrationReport> {
    if base.task != TaskKind::PickPlace2D {
        return Err(Error::Config(
            "calibration sweeps the pick-place wall margin".into(),
        ));
    }
    let mut sweep = Vec::with_capacity(margins.len());
    for &m in margins {
        let mut cfg = base.clone();
        cfg.pick_place.wall_margin = m;
        let rate = nominal_stats(&cfg, 0..episodes)?.success_rate();
        sweep.push(MarginRate {
            wall_margin: m,
            success_rate: rate,
        });
    }
    let selected = sweep
        .iter()
        .filter(|r| (r.success_rate - target).abs() <= tolerance)
        .min_by(|x, y| {
            (x.success_rate - target)
                .abs()
                .total_cmp(&(y.success_rate - target).abs())
        })
        .copied();
    Ok(CalibrationReport { sweep, selected })
}
