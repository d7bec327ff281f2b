//! Deterministic 2D kinematic manipulation environments.
//!
//! Three tasks share one state type:
//!
//! * [`TaskKind::PickPlace2D`]: top view of two bins. The gripper is two thin
//!   finger pads; it must reach around the object inside the source bin,
//!   where the pads can hit the bin walls.
//! * [`TaskKind::Shelf2D`]: side view of a box on a table and a shelf. The
//!   box position is observed with per-episode noise, so the grasp offset is
//!   latent and the box can hit the shelf while being inserted.
//! * [`TaskKind::ClutteredShelf2D`]: the shelf task with two items on the
//!   shelf that must not be pushed or tipped.
//!
//! Transitions are pure functions of `(config, state, action)`. A blocked
//! motion never penetrates: it either leaves the state unchanged and reports
//! a failure, or is clamped (workspace bounds, setting a box down).

mod config;
mod pick_place;
mod shelf;

pub use config::{
    ClutterGeometry, PickPlaceGeometry, ShelfGeometry, TaskConfig, DEFAULT_WALL_MARGIN,
};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Axis, Rect, Vec2};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    PickPlace2D,
    Shelf2D,
    ClutteredShelf2D,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [
        TaskKind::PickPlace2D,
        TaskKind::Shelf2D,
        TaskKind::ClutteredShelf2D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::PickPlace2D => "pick-place",
            TaskKind::Shelf2D => "shelf",
            TaskKind::ClutteredShelf2D => "cluttered-shelf",
        }
    }

    pub fn is_shelf(self) -> bool {
        !matches!(self, TaskKind::PickPlace2D)
    }

    /// The primitive action set: translations on both axes, plus quarter-turn
    /// yaw rotations in pick-place.
    pub fn primitives(self) -> &'static [Primitive] {
        use Primitive::*;
        match self {
            TaskKind::PickPlace2D => &[
                TranslatePlusA,
                TranslateMinusA,
                TranslatePlusB,
                TranslateMinusB,
                RotatePlus,
                RotateMinus,
            ],
            _ => &[
                TranslatePlusA,
                TranslateMinusA,
                TranslatePlusB,
                TranslateMinusB,
            ],
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_'))
            .collect::<String>()
            .to_ascii_lowercase();
        match key.trim_end_matches("2d") {
            "pickplace" => Ok(TaskKind::PickPlace2D),
            "shelf" => Ok(TaskKind::Shelf2D),
            "clutteredshelf" => Ok(TaskKind::ClutteredShelf2D),
            _ => Err(Error::Config(format!("unknown task '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Primitive {
    TranslatePlusA,
    TranslateMinusA,
    TranslatePlusB,
    TranslateMinusB,
    RotatePlus,
    RotateMinus,
}

impl Primitive {
    /// Axis and direction of a translation primitive.
    pub fn translation(self) -> Option<(Axis, f64)> {
        match self {
            Primitive::TranslatePlusA => Some((Axis::A, 1.0)),
            Primitive::TranslateMinusA => Some((Axis::A, -1.0)),
            Primitive::TranslatePlusB => Some((Axis::B, 1.0)),
            Primitive::TranslateMinusB => Some((Axis::B, -1.0)),
            Primitive::RotatePlus | Primitive::RotateMinus => None,
        }
    }

    pub fn toward(axis: Axis, sign: f64) -> Primitive {
        match (axis, sign >= 0.0) {
            (Axis::A, true) => Primitive::TranslatePlusA,
            (Axis::A, false) => Primitive::TranslateMinusA,
            (Axis::B, true) => Primitive::TranslatePlusB,
            (Axis::B, false) => Primitive::TranslateMinusB,
        }
    }
}

/// Everything the simulator can execute. Gripper commands are only issued by
/// the nominal controllers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimAction {
    Primitive(Primitive),
    GripperClose,
    GripperOpen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureKind {
    Collision,
    Slip,
    ObstacleDisturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminal {
    None,
    Goal,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub pose: Rect,
    pub initial: Rect,
}

impl Obstacle {
    fn new(pose: Rect) -> Self {
        Self {
            pose,
            initial: pose,
        }
    }

    pub fn displacement(&self) -> f64 {
        (self.pose.center - self.initial.center).norm()
    }

    pub fn rotation(&self) -> f64 {
        crate::geometry::normalize_angle(self.pose.angle - self.initial.angle).abs()
    }
}

/// Per-episode shelf dimensions, fixed at reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShelfLayout {
    pub front: f64,
    pub floor: f64,
    pub depth: f64,
    pub opening: f64,
    /// Box width and height.
    pub box_size: Vec2,
    /// Goal position of the box centroid.
    pub target: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Static geometry the hand and object must never penetrate.
    pub walls: Vec<Rect>,
    pub shelf: Option<ShelfLayout>,
}

/// Full simulator state. The observable part is what [`observe`] exposes;
/// the grasp offset, in-hand angle and observation noise are latent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub ee_pose: Rect,
    /// End-effector yaw in quarter turns, 0..=3.
    pub ee_yaw: u8,
    pub object_pose: Rect,
    pub grasped: bool,
    /// Object center relative to the end-effector, in the hand frame.
    pub grasp_offset: Vec2,
    pub object_angle_in_hand: f64,
    pub obstacles: Vec<Obstacle>,
    pub step_count: u32,
    pub episode_seed: u64,
    /// Frozen for the episode; added to the true object position.
    pub observation_noise: Vec2,
    pub scene: Scene,
}

impl WorldState {
    /// All latent-free poses are finite and the hand sits inside the
    /// workspace.
    pub fn is_well_formed(&self, cfg: &TaskConfig) -> bool {
        let (lo, hi) = workspace(cfg);
        let c = self.ee_pose.center;
        c.is_finite()
            && self.object_pose.center.is_finite()
            && c.a >= lo.a - 1e-9
            && c.a <= hi.a + 1e-9
            && c.b >= lo.b - 1e-9
            && c.b <= hi.b + 1e-9
            && self.ee_yaw < 4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ee_position: Vec2,
    pub ee_yaw_index: u8,
    pub observed_object_position: Vec2,
    pub grasped: bool,
    pub step_count: u32,
    pub obstacle_positions: Vec<f64>,
    /// Static per-episode scene descriptors the controllers plan against:
    /// shelf front, floor height, depth, opening, box width and height.
    /// Empty in pick-place, whose geometry is fixed.
    pub scene: Vec<f64>,
}

/// Scale applied to `step_count` in the feature vector.
pub const STEP_FEATURE_SCALE: f64 = 0.01;

impl Observation {
    /// Flat feature vector consumed by policies and classifiers. Fields appear
    /// in declaration order; yaw is one-hot in pick-place and omitted in the
    /// shelf tasks, where it is always zero.
    pub fn features(&self, task: TaskKind) -> Vec<f64> {
        let mut f = Vec::with_capacity(feature_dim(task));
        f.push(self.ee_position.a);
        f.push(self.ee_position.b);
        if task == TaskKind::PickPlace2D {
            f.extend((0..4).map(|i| if i == self.ee_yaw_index { 1.0 } else { 0.0 }));
        }
        f.push(self.observed_object_position.a);
        f.push(self.observed_object_position.b);
        f.push(if self.grasped { 1.0 } else { 0.0 });
        if task.is_shelf() {
            f.push(f64::from(self.step_count) * STEP_FEATURE_SCALE);
        }
        f.extend_from_slice(&self.obstacle_positions);
        f.extend_from_slice(&self.scene);
        f
    }
}

pub fn feature_dim(task: TaskKind) -> usize {
    match task {
        TaskKind::PickPlace2D => 9,
        TaskKind::Shelf2D => 12,
        TaskKind::ClutteredShelf2D => 16,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next: WorldState,
    pub observation: Observation,
    pub terminal: Terminal,
    pub failure_kind: Option<FailureKind>,
}

pub(crate) fn workspace(cfg: &TaskConfig) -> (Vec2, Vec2) {
    match cfg.task {
        TaskKind::PickPlace2D => (cfg.pick_place.workspace_min, cfg.pick_place.workspace_max),
        _ => (cfg.shelf.workspace_min, cfg.shelf.workspace_max),
    }
}

/// Samples the initial state of episode `seed`. Geometry and observation
/// noise come from separate streams of the episode seed.
pub fn reset(cfg: &TaskConfig, seed: u64) -> Result<(WorldState, Observation)> {
    cfg.validate()?;
    let noise = sample_noise(cfg, seed)?;
    let state = match cfg.task {
        TaskKind::PickPlace2D => pick_place::reset(cfg, seed, noise)?,
        TaskKind::Shelf2D | TaskKind::ClutteredShelf2D => shelf::reset(cfg, seed, noise),
    };
    let obs = observe(cfg, &state);
    Ok((state, obs))
}

/// The per-episode observation noise draw for `seed`.
pub fn sample_noise(cfg: &TaskConfig, seed: u64) -> Result<Vec2> {
    let mut rng = seeding::stream(seed, "observation-noise");
    let na = Normal::new(0.0, cfg.noise_sigma.a).map_err(|e| Error::Config(e.to_string()))?;
    let nb = Normal::new(0.0, cfg.noise_sigma.b).map_err(|e| Error::Config(e.to_string()))?;
    Ok(Vec2::new(na.sample(&mut rng), nb.sample(&mut rng)))
}

pub fn observe(cfg: &TaskConfig, state: &WorldState) -> Observation {
    let scene = match &state.scene.shelf {
        Some(s) => vec![
            s.front,
            s.floor,
            s.depth,
            s.opening,
            s.box_size.a,
            s.box_size.b,
        ],
        None => Vec::new(),
    };
    let obstacle_positions = if cfg.task == TaskKind::ClutteredShelf2D {
        state
            .obstacles
            .iter()
            .flat_map(|o| [o.pose.center.a, o.pose.center.b])
            .collect()
    } else {
        Vec::new()
    };
    Observation {
        ee_position: state.ee_pose.center,
        ee_yaw_index: state.ee_yaw,
        observed_object_position: state.object_pose.center + state.observation_noise,
        grasped: state.grasped,
        step_count: state.step_count,
        obstacle_positions,
        scene,
    }
}

/// Executes one primitive.
pub fn step(cfg: &TaskConfig, state: &WorldState, action: Primitive) -> Result<StepOutcome> {
    apply(cfg, state, SimAction::Primitive(action))
}

/// Executes a primitive or gripper command. The fail-condition is evaluated
/// before the goal, so a colliding final motion is a failure.
pub fn apply(cfg: &TaskConfig, state: &WorldState, action: SimAction) -> Result<StepOutcome> {
    if let SimAction::Primitive(p) = action {
        if !cfg.task.primitives().contains(&p) {
            return Err(Error::InvalidAction {
                action: format!("{p:?}"),
                task: cfg.task,
            });
        }
    }
    let (mut next, failure) = match cfg.task {
        TaskKind::PickPlace2D => pick_place::transition(cfg, state, action),
        _ => shelf::transition(cfg, state, action),
    };
    next.step_count = state.step_count + 1;
    let terminal = if failure.is_some() {
        Terminal::Failure
    } else if goal_reached(cfg, &next) {
        Terminal::Goal
    } else {
        Terminal::None
    };
    let observation = observe(cfg, &next);
    Ok(StepOutcome {
        next,
        observation,
        terminal,
        failure_kind: failure,
    })
}

/// Moves the hand (and a carried object) by `d` without simulating the
/// motion. `None` if the result leaves the workspace or penetrates the scene.
pub fn displace(cfg: &TaskConfig, state: &WorldState, d: Vec2) -> Option<WorldState> {
    let (lo, hi) = workspace(cfg);
    let c = state.ee_pose.center + d;
    if c.a < lo.a || c.a > hi.a || c.b < lo.b || c.b > hi.b {
        return None;
    }
    let mut next = state.clone();
    next.ee_pose = state.ee_pose.translated(d);
    if state.grasped {
        next.object_pose = state.object_pose.translated(d);
    }
    let clear = match cfg.task {
        TaskKind::PickPlace2D => pick_place::is_clear(cfg, &next),
        _ => shelf::is_clear(&next),
    };
    clear.then_some(next)
}

/// Slides a resting object by `d`; shelf boxes only move along `a`. `None`
/// while grasped or if the object would penetrate the scene.
pub fn displace_object(cfg: &TaskConfig, state: &WorldState, d: Vec2) -> Option<WorldState> {
    if state.grasped {
        return None;
    }
    let d = if cfg.task.is_shelf() {
        Vec2::new(d.a, 0.0)
    } else {
        d
    };
    let mut next = state.clone();
    next.object_pose = state.object_pose.translated(d);
    let obj = &next.object_pose;
    if next.scene.walls.iter().any(|w| w.overlaps(obj))
        || next.obstacles.iter().any(|o| o.pose.overlaps(obj))
    {
        return None;
    }
    let clear = cfg.task.is_shelf() || pick_place::is_clear(cfg, &next);
    clear.then_some(next)
}

/// The binary task goal.
pub fn goal_reached(cfg: &TaskConfig, state: &WorldState) -> bool {
    match cfg.task {
        TaskKind::PickPlace2D => pick_place::goal(cfg, state),
        _ => shelf::goal(cfg, state),
    }
}

/// `f_goal` as a 0/1 value.
pub fn f_goal(cfg: &TaskConfig, state: &WorldState) -> u8 {
    u8::from(goal_reached(cfg, state))
}

/// An environment instance with episode bookkeeping. Refuses further steps
/// once an episode has terminated.
#[derive(Debug, Clone)]
pub struct Env {
    pub config: TaskConfig,
    state: WorldState,
    terminal: Terminal,
}

impl Env {
    pub fn new(config: TaskConfig, seed: u64) -> Result<Self> {
        let (state, _) = reset(&config, seed)?;
        Ok(Self {
            config,
            state,
            terminal: Terminal::None,
        })
    }

    /// Resumes from an arbitrary (non-terminal) state.
    pub fn from_state(config: TaskConfig, state: WorldState) -> Self {
        Self {
            config,
            state,
            terminal: Terminal::None,
        }
    }

    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        let (state, obs) = reset(&self.config, seed)?;
        self.state = state;
        self.terminal = Terminal::None;
        Ok(obs)
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn observation(&self) -> Observation {
        observe(&self.config, &self.state)
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal != Terminal::None
    }

    pub fn step(&mut self, action: Primitive) -> Result<StepOutcome> {
        self.apply(SimAction::Primitive(action))
    }

    pub fn apply(&mut self, action: SimAction) -> Result<StepOutcome> {
        if self.is_terminal() {
            return Err(Error::TerminalState);
        }
        let out = apply(&self.config, &self.state, action)?;
        self.state = out.next.clone();
        self.terminal = out.terminal;
        Ok(out)
    }
}
