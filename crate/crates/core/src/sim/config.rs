//! Task configuration and its on-disk TOML schema.
//!
//! Every geometric constant the environments and nominal controllers use
//! lives here, so a config file fully determines an experiment. All lengths
//! are meters, all angles radians.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

use super::TaskKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub task: TaskKind,
    /// Hard cap on simulator steps per episode, across nominal execution,
    /// recovery and option rollouts.
    pub horizon: u32,
    /// Translation primitive length.
    pub step_size: f64,
    /// Per-episode observation noise standard deviation on the object
    /// position (shelf tasks only).
    pub noise_sigma: Vec2,
    /// Per-skill step budget of the nominal controllers.
    pub skill_max_steps: u32,
    pub pick_place: PickPlaceGeometry,
    pub shelf: ShelfGeometry,
    pub clutter: ClutterGeometry,
}

/// Top view: two square bins side by side, a square object, a parallel
/// gripper whose fingers span the `b` axis at yaw 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickPlaceGeometry {
    pub bin_size: f64,
    pub wall_thickness: f64,
    /// Lower-left interior corner of the source bin.
    pub source_origin: Vec2,
    /// Lower-left interior corner of the target bin.
    pub target_origin: Vec2,
    pub object_side: f64,
    /// Gripper envelope: full finger span and finger thickness.
    pub finger_span: f64,
    pub finger_thickness: f64,
    /// Length of each finger pad along the span axis.
    pub pad_length: f64,
    /// Keep-out band between the bin walls and the sampled object footprint.
    pub wall_margin: f64,
    pub home: Vec2,
    /// Max hand-frame offset of the object center across the fingers for a
    /// grasp to close.
    pub grasp_tolerance: f64,
    pub workspace_min: Vec2,
    pub workspace_max: Vec2,
}

/// Side view (`a` = y horizontal, `b` = z vertical): box on a table, open
/// shelf to its right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShelfGeometry {
    pub table_extent: (f64, f64),
    pub board_thickness: f64,
    pub shelf_front: (f64, f64),
    pub shelf_floor: (f64, f64),
    pub shelf_depth: (f64, f64),
    /// Opening height above the box height.
    pub opening_clearance: (f64, f64),
    pub box_width: (f64, f64),
    pub box_height: (f64, f64),
    pub box_position: (f64, f64),
    pub hand_home: Vec2,
    pub hand_half_extents: Vec2,
    /// Extra closing range of the fingers beyond the box half width.
    pub grasp_slack: f64,
    /// Lowest hand height the pick controller commands above the table.
    pub min_grasp_height: f64,
    /// Planned gap between the box bottom and the shelf floor when inserting.
    pub insert_clearance: f64,
    /// Planned gap between the box and the shelf front at pre-placement.
    pub preplace_gap: f64,
    /// Highest the observed box may sit above the insertion height when the
    /// place controller opens the gripper.
    pub release_height: f64,
    pub goal_tolerance: f64,
    pub goal_max_angle: f64,
    /// A collision while grasped slips the box in hand when the vertical
    /// grasp offset exceeds this.
    pub slip_threshold: f64,
    pub slip_angle: f64,
    pub workspace_min: Vec2,
    pub workspace_max: Vec2,
}

/// Extra clutter for the cluttered shelf: a tall item behind the placement
/// target and a low item between the shelf front and the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterGeometry {
    pub shelf_depth: (f64, f64),
    pub back_width: f64,
    pub back_height: (f64, f64),
    pub back_gap: (f64, f64),
    pub front_width: f64,
    pub front_height: (f64, f64),
    pub front_gap: (f64, f64),
    pub max_displacement: f64,
    pub max_rotation: f64,
}

impl Default for PickPlaceGeometry {
    fn default() -> Self {
        Self {
            bin_size: 0.40,
            wall_thickness: 0.01,
            source_origin: Vec2::new(0.0, 0.0),
            target_origin: Vec2::new(0.60, 0.0),
            object_side: 0.04,
            finger_span: 0.16,
            finger_thickness: 0.02,
            pad_length: 0.01,
            wall_margin: DEFAULT_WALL_MARGIN,
            home: Vec2::new(0.20, 0.21),
            grasp_tolerance: 0.015,
            workspace_min: Vec2::new(-0.05, -0.05),
            workspace_max: Vec2::new(1.05, 0.45),
        }
    }
}

/// Output of `rechain calibrate` on the default geometry.
pub const DEFAULT_WALL_MARGIN: f64 = 0.02;

impl Default for ShelfGeometry {
    fn default() -> Self {
        Self {
            table_extent: (-0.50, 0.90),
            board_thickness: 0.02,
            shelf_front: (0.20, 0.26),
            shelf_floor: (0.10, 0.16),
            shelf_depth: (0.16, 0.22),
            opening_clearance: (0.05, 0.08),
            box_width: (0.04, 0.06),
            box_height: (0.08, 0.12),
            box_position: (-0.10, 0.0),
            hand_home: Vec2::new(-0.20, 0.30),
            hand_half_extents: Vec2::new(0.01, 0.01),
            grasp_slack: 0.01,
            min_grasp_height: 0.025,
            insert_clearance: 0.015,
            preplace_gap: 0.03,
            release_height: 0.05,
            goal_tolerance: 0.02,
            goal_max_angle: 0.26,
            slip_threshold: 0.015,
            slip_angle: 0.5,
            workspace_min: Vec2::new(-0.50, -0.05),
            workspace_max: Vec2::new(0.80, 0.60),
        }
    }
}

impl Default for ClutterGeometry {
    fn default() -> Self {
        Self {
            shelf_depth: (0.22, 0.26),
            back_width: 0.03,
            back_height: (0.06, 0.10),
            back_gap: (0.005, 0.03),
            front_width: 0.03,
            front_height: (0.005, 0.02),
            front_gap: (0.005, 0.02),
            max_displacement: 0.01,
            max_rotation: 0.2,
        }
    }
}

impl TaskConfig {
    pub fn new(task: TaskKind) -> Self {
        Self {
            task,
            horizon: 600,
            step_size: 0.02,
            noise_sigma: match task {
                TaskKind::PickPlace2D => Vec2::ZERO,
                TaskKind::Shelf2D | TaskKind::ClutteredShelf2D => Vec2::new(0.01, 0.02),
            },
            skill_max_steps: 60,
            pick_place: PickPlaceGeometry::default(),
            shelf: ShelfGeometry::default(),
            clutter: ClutterGeometry::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TaskConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("task config always serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 over the canonical JSON encoding; stamped into failure
    /// datasets so records are never replayed against different geometry.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("task config always serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if self.step_size.is_nan() || self.step_size <= 0.0 {
            return bad("step_size must be positive");
        }
        if self.skill_max_steps == 0 {
            return bad("skill_max_steps must be positive");
        }
        if self.noise_sigma.a < 0.0 || self.noise_sigma.b < 0.0 {
            return bad("noise_sigma must be non-negative");
        }
        match self.task {
            TaskKind::PickPlace2D => self.pick_place.validate(),
            TaskKind::Shelf2D => self.shelf.validate(None),
            TaskKind::ClutteredShelf2D => self.shelf.validate(Some(&self.clutter)),
        }
    }
}

fn check_range(name: &str, r: (f64, f64)) -> Result<()> {
    if !(r.0.is_finite() && r.1.is_finite() && r.0 <= r.1) {
        return Err(Error::Config(format!("{name} range is empty: {r:?}")));
    }
    Ok(())
}

impl PickPlaceGeometry {
    pub fn object_half(&self) -> f64 {
        0.5 * self.object_side
    }

    /// Interior of the source bin where the object center may be sampled.
    pub fn sampling_range(&self) -> (Vec2, Vec2) {
        let inset = self.object_half() + self.wall_margin;
        let lo = self.source_origin + Vec2::new(inset, inset);
        let hi = self.source_origin + Vec2::new(self.bin_size - inset, self.bin_size - inset);
        (lo, hi)
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.sampling_range();
        if !(lo.a <= hi.a && lo.b <= hi.b) {
            return Err(Error::Config(format!(
                "object of side {} with wall margin {} does not fit in a {} bin",
                self.object_side, self.wall_margin, self.bin_size
            )));
        }
        if self.wall_margin < 0.0 {
            return Err(Error::Config("wall_margin must be non-negative".into()));
        }
        if self.finger_span <= self.object_side + 2.0 * self.pad_length {
            return Err(Error::Config(
                "fingers must open wider than the object".into(),
            ));
        }
        if self.pad_length <= 0.0 || self.finger_thickness <= 0.0 || self.object_side <= 0.0 {
            return Err(Error::Config(
                "gripper and object dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl ShelfGeometry {
    fn validate(&self, clutter: Option<&ClutterGeometry>) -> Result<()> {
        for (name, r) in [
            ("shelf_front", self.shelf_front),
            ("shelf_floor", self.shelf_floor),
            ("shelf_depth", self.shelf_depth),
            ("opening_clearance", self.opening_clearance),
            ("box_width", self.box_width),
            ("box_height", self.box_height),
            ("box_position", self.box_position),
        ] {
            check_range(name, r)?;
        }
        if self.box_width.0 <= 0.0 || self.box_height.0 <= 0.0 {
            return Err(Error::Config("box dimensions must be positive".into()));
        }
        if self.box_position.1 + 0.5 * self.box_width.1 >= self.shelf_front.0 {
            return Err(Error::Config("box must start in front of the shelf".into()));
        }
        let depth = clutter.map_or(self.shelf_depth, |c| c.shelf_depth);
        if depth.0 < self.box_width.1 {
            return Err(Error::Config(
                "shelf is shallower than the widest box".into(),
            ));
        }
        if let Some(c) = clutter {
            for (name, r) in [
                ("clutter.shelf_depth", c.shelf_depth),
                ("clutter.back_height", c.back_height),
                ("clutter.back_gap", c.back_gap),
                ("clutter.front_height", c.front_height),
                ("clutter.front_gap", c.front_gap),
            ] {
                check_range(name, r)?;
            }
            // Both obstacles must fit between the front and back of the
            // shallowest shelf with the widest box centered.
            let half_free = 0.5 * (c.shelf_depth.0 - self.box_width.1);
            if c.back_gap.1 + c.back_width > half_free || c.front_gap.1 + c.front_width > half_free
            {
                return Err(Error::Config(
                    "clutter obstacles do not fit on the shelf".into(),
                ));
            }
            if c.back_height.1 >= self.box_height.0 + self.opening_clearance.0 {
                return Err(Error::Config(
                    "back obstacle taller than the shelf opening".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_hash() {
        for task in TaskKind::ALL {
            let cfg = TaskConfig::new(task);
            let text = cfg.to_toml();
            let back = TaskConfig::from_toml(&text).unwrap();
            assert_eq!(cfg, back);
            assert_eq!(cfg.hash(), back.hash());
            assert_eq!(cfg.hash().len(), 64);
        }
    }

    #[test]
    fn hash_tracks_geometry() {
        let a = TaskConfig::new(TaskKind::PickPlace2D);
        let mut b = a.clone();
        b.pick_place.wall_margin = 0.0;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn oversize_object_is_a_config_error() {
        let mut cfg = TaskConfig::new(TaskKind::PickPlace2D);
        cfg.pick_place.object_side = 0.5;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = TaskConfig::new(TaskKind::Shelf2D).to_toml();
        text.insert_str(0, "bogus = 1\n");
        assert!(TaskConfig::from_toml(&text).is_err());
    }
}
