//! Initiation-set grids and nominal failure scatters.

use serde::{Deserialize, Serialize};

use crate::discovery::discover_failures;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::sim::{self, TaskConfig, TaskKind, WorldState};
use crate::skills::{self, Outcome};

/// Footprint width of one finger; the band next to a wall in which
/// pick-place failures are expected.
pub const FINGER_WIDTH: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub coord_a: f64,
    pub coord_b: f64,
    pub in_precondition: u8,
    pub failed: u8,
    pub timeout: u8,
}

impl GridPoint {
    pub const CLASSES: [&'static str; 3] = ["in precondition", "failed", "timeout"];

    pub fn class(&self) -> usize {
        if self.in_precondition == 1 {
            0
        } else if self.failed == 1 {
            1
        } else {
            2
        }
    }
}

/// A nominal failure located by the object center in the failure state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailurePoint {
    pub seed: u64,
    pub coord_a: f64,
    pub coord_b: f64,
    pub plan_skill_index: usize,
    pub failure_kind: String,
    /// Gap between the object edge and the nearer top or bottom wall of the
    /// source bin; `NaN` for shelf tasks.
    pub wall_gap: f64,
}

fn lattice(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

/// Gap between the object edge at height `b` and the nearer of the source
/// bin's top and bottom inner wall faces.
pub fn top_bottom_gap(cfg: &TaskConfig, b: f64) -> f64 {
    let g = &cfg.pick_place;
    let (lo, hi) = (g.source_origin.b, g.source_origin.b + g.bin_size);
    let h = g.object_half();
    (b - h - lo).min(hi - b - h)
}

/// Places the object at `c` with the hand at home, or moves the hand to `c`
/// on shelf tasks. `None` where the placement penetrates the scene.
fn grid_state(cfg: &TaskConfig, base: &WorldState, c: Vec2) -> Option<WorldState> {
    match cfg.task {
        TaskKind::PickPlace2D => sim::displace_object(cfg, base, c - base.object_pose.center),
        _ => sim::displace(cfg, base, c - base.ee_pose.center),
    }
}

/// Sweeps an `n x n` grid and classifies the outcome of the plan suffix
/// starting at `skill_index` (1-based). Pick-place sweeps object positions
/// over the whole source-bin interior; shelf tasks sweep hand positions over
/// the workspace of episode 0. Points that penetrate the scene are skipped.
pub fn initiation_grid(cfg: &TaskConfig, skill_index: usize, n: usize) -> Result<Vec<GridPoint>> {
    let plan = skills::plan(cfg.task);
    if skill_index == 0 || skill_index > plan.len() {
        return Err(Error::InvalidOption {
            index: skill_index,
            plan_len: plan.len(),
        });
    }
    if n == 0 {
        return Err(Error::Config("grid resolution must be positive".into()));
    }
    let (base, _) = sim::reset(cfg, 0)?;
    let (lo, hi) = match cfg.task {
        TaskKind::PickPlace2D => {
            let g = &cfg.pick_place;
            let inset = Vec2::new(g.object_half(), g.object_half());
            (
                g.source_origin + inset,
                g.source_origin + Vec2::new(g.bin_size, g.bin_size) - inset,
            )
        }
        _ => (cfg.shelf.workspace_min, cfg.shelf.workspace_max),
    };
    let mut out = Vec::new();
    for b in lattice(lo.b, hi.b, n) {
        for a in lattice(lo.a, hi.a, n) {
            let Some(state) = grid_state(cfg, &base, Vec2::new(a, b)) else {
                continue;
            };
            let outcome = skills::simulate_suffix(cfg, &state, skill_index)?.outcome;
            out.push(GridPoint {
                coord_a: a,
                coord_b: b,
                in_precondition: u8::from(outcome == Outcome::Goal),
                failed: u8::from(outcome == Outcome::Failure),
                timeout: u8::from(outcome == Outcome::Timeout),
            });
        }
    }
    Ok(out)
}

/// Failures of the nominal plan on seeds `0..episodes`.
pub fn failure_scatter(cfg: &TaskConfig, episodes: u64) -> Result<Vec<FailurePoint>> {
    let ds = discover_failures(cfg, episodes, 0, None)?;
    Ok(ds
        .records
        .iter()
        .map(|r| {
            let c = r.world_state.object_pose.center;
            FailurePoint {
                seed: r.seed,
                coord_a: c.a,
                coord_b: c.b,
                plan_skill_index: r.plan_skill_index,
                failure_kind: format!("{:?}", r.failure_kind),
                wall_gap: if cfg.task == TaskKind::PickPlace2D {
                    top_bottom_gap(cfg, c.b)
                } else {
                    f64::NAN
                },
            }
        })
        .collect())
}

/// Share of failures within one finger width of the top or bottom wall.
pub fn near_wall_share(points: &[FailurePoint]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    points.iter().filter(|p| p.wall_gap < FINGER_WIDTH).count() as f64 / points.len() as f64
}
