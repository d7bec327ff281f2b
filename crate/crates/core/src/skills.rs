//! Scripted nominal controllers and the sequential plan executor.
//!
//! Each controller is a stateless map from the current observation to a
//! primitive, a gripper command, or `Done`. Targets are computed from the
//! observed object position, so under observation noise the controllers
//! aim at the wrong place; that is where most shelf failures come from.

use serde::{Deserialize, Serialize};

use crate::discovery::FailureRecord;
use crate::error::{Error, Result};
use crate::geometry::{Axis, Vec2};
use crate::sim::{
    self, FailureKind, Observation, Primitive, SimAction, StepOutcome, TaskConfig, TaskKind,
    Terminal, WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SkillId {
    GoToGrasp,
    Pick,
    GoToGoal,
    Place,
    PickS,
    Move,
    PlaceS,
}

impl SkillId {
    pub fn name(self) -> &'static str {
        match self {
            SkillId::GoToGrasp => "go_to_grasp",
            SkillId::Pick => "pick",
            SkillId::GoToGoal => "go_to_goal",
            SkillId::Place => "place",
            SkillId::PickS => "pick_box",
            SkillId::Move => "move",
            SkillId::PlaceS => "place_box",
        }
    }
}

/// A controller's output for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Act(SimAction),
    Done,
}

/// The nominal plan of a task.
pub fn plan(task: TaskKind) -> &'static [SkillId] {
    match task {
        TaskKind::PickPlace2D => &[
            SkillId::GoToGrasp,
            SkillId::Pick,
            SkillId::GoToGoal,
            SkillId::Place,
        ],
        TaskKind::Shelf2D | TaskKind::ClutteredShelf2D => {
            &[SkillId::PickS, SkillId::Move, SkillId::PlaceS]
        }
    }
}

/// Greedy axis-wise step from `from` toward `to`, trying axes in `order`.
/// `None` once every axis is within `tol`.
fn greedy(from: Vec2, to: Vec2, order: [Axis; 2], tol: f64) -> Option<Primitive> {
    order.into_iter().find_map(|axis| {
        let diff = to.axis(axis) - from.axis(axis);
        (diff.abs() > tol).then(|| Primitive::toward(axis, diff))
    })
}

fn act_toward(from: Vec2, to: Vec2, order: [Axis; 2], tol: f64) -> Command {
    greedy(from, to, order, tol).map_or(Command::Done, |p| Command::Act(SimAction::Primitive(p)))
}

/// Per-episode shelf dimensions as exposed in the observation.
struct ShelfView {
    front: f64,
    floor: f64,
    depth: f64,
    width: f64,
    height: f64,
}

impl ShelfView {
    fn new(obs: &Observation) -> Self {
        let s = &obs.scene;
        Self {
            front: s[0],
            floor: s[1],
            depth: s[2],
            width: s[4],
            height: s[5],
        }
    }

    /// Box center height at which it is carried into the shelf.
    fn insert_height(&self, cfg: &TaskConfig) -> f64 {
        self.floor + cfg.shelf.insert_clearance + 0.5 * self.height
    }
}

/// The controller policy: one command from one observation.
pub fn policy(cfg: &TaskConfig, skill: SkillId, obs: &Observation) -> Command {
    let tol = 0.5 * cfg.step_size;
    let hand = obs.ee_position;
    let object = obs.observed_object_position;
    match skill {
        SkillId::GoToGrasp => {
            if obs.grasped {
                return Command::Done;
            }
            // Slide along the finger span first, then close in across it.
            let span = if obs.ee_yaw_index.is_multiple_of(2) {
                Axis::B
            } else {
                Axis::A
            };
            act_toward(hand, object, [span, span.other()], tol)
        }
        SkillId::Pick => {
            if obs.grasped {
                Command::Done
            } else {
                Command::Act(SimAction::GripperClose)
            }
        }
        SkillId::GoToGoal => {
            let g = &cfg.pick_place;
            let center = g.target_origin + Vec2::new(0.5 * g.bin_size, 0.5 * g.bin_size);
            act_toward(hand, center, [Axis::A, Axis::B], tol)
        }
        SkillId::Place => {
            if obs.grasped {
                Command::Act(SimAction::GripperOpen)
            } else {
                Command::Done
            }
        }
        SkillId::PickS => {
            if obs.grasped {
                return Command::Done;
            }
            let target = Vec2::new(object.a, object.b.max(cfg.shelf.min_grasp_height));
            match greedy(hand, target, [Axis::A, Axis::B], tol) {
                Some(p) => Command::Act(SimAction::Primitive(p)),
                None => Command::Act(SimAction::GripperClose),
            }
        }
        SkillId::Move => {
            if !obs.grasped {
                return Command::Done;
            }
            let v = ShelfView::new(obs);
            let box_target = Vec2::new(
                v.front - cfg.shelf.preplace_gap - 0.5 * v.width,
                v.insert_height(cfg),
            );
            // Hand target that puts the observed box on the pre-placement pose.
            act_toward(hand, hand + (box_target - object), [Axis::B, Axis::A], tol)
        }
        SkillId::PlaceS => {
            if !obs.grasped {
                return Command::Done;
            }
            let v = ShelfView::new(obs);
            let z_ins = v.insert_height(cfg);
            let err_a = v.front + 0.5 * v.depth - object.a;
            let outside = object.a + 0.5 * v.width <= v.front;
            let prim = if err_a > tol {
                if outside && object.b < z_ins - tol {
                    Primitive::TranslatePlusB
                } else {
                    Primitive::TranslatePlusA
                }
            } else if err_a < -tol {
                Primitive::TranslateMinusA
            } else if object.b > z_ins + cfg.shelf.release_height {
                Primitive::TranslateMinusB
            } else {
                return Command::Act(SimAction::GripperOpen);
            };
            Command::Act(SimAction::Primitive(prim))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Goal,
    Failure,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub state: WorldState,
    pub action: SimAction,
    pub outcome: StepOutcome,
}

/// Transitions `start..end` of a trace were issued by `skill`, the
/// `plan_index`-th (1-based) controller of the plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub skill: SkillId,
    pub plan_index: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub transitions: Vec<TraceStep>,
    pub segments: Vec<Segment>,
    pub outcome: Outcome,
    pub failure_record: Option<FailureRecord>,
}

/// Result of a suffix rollout without the per-step trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub outcome: Outcome,
    pub final_state: WorldState,
    pub steps: u32,
    /// 1-based plan index and kind of the failure, if any.
    pub failure: Option<(usize, FailureKind)>,
}

fn check_index(task: TaskKind, start: usize) -> Result<()> {
    let len = plan(task).len();
    if start == 0 || start > len {
        return Err(Error::InvalidOption {
            index: start,
            plan_len: len,
        });
    }
    Ok(())
}

/// Shared executor; `on_step` sees every transition with its plan index.
fn run(
    cfg: &TaskConfig,
    state: &WorldState,
    start: usize,
    mut on_step: impl FnMut(usize, &WorldState, SimAction, &StepOutcome),
) -> Result<Rollout> {
    check_index(cfg.task, start)?;
    let mut s = state.clone();
    let mut steps = 0;
    for (i, &skill) in plan(cfg.task).iter().enumerate().skip(start - 1) {
        for _ in 0..cfg.skill_max_steps {
            if s.step_count >= cfg.horizon {
                return Ok(Rollout {
                    outcome: Outcome::Timeout,
                    final_state: s,
                    steps,
                    failure: None,
                });
            }
            let action = match policy(cfg, skill, &sim::observe(cfg, &s)) {
                Command::Done => break,
                Command::Act(a) => a,
            };
            let out = sim::apply(cfg, &s, action)?;
            steps += 1;
            on_step(i + 1, &s, action, &out);
            s = out.next;
            match out.terminal {
                Terminal::Failure => {
                    let failure = out.failure_kind.map(|k| (i + 1, k));
                    return Ok(Rollout {
                        outcome: Outcome::Failure,
                        final_state: s,
                        steps,
                        failure,
                    });
                }
                Terminal::Goal => {
                    return Ok(Rollout {
                        outcome: Outcome::Goal,
                        final_state: s,
                        steps,
                        failure: None,
                    })
                }
                Terminal::None => {}
            }
        }
    }
    let outcome = if sim::goal_reached(cfg, &s) {
        Outcome::Goal
    } else {
        Outcome::Timeout
    };
    Ok(Rollout {
        outcome,
        final_state: s,
        steps,
        failure: None,
    })
}

/// Runs a single controller from `state` until it reports `Done`, the
/// episode terminates, or its step budget runs out.
pub fn run_skill(
    cfg: &TaskConfig,
    state: &WorldState,
    skill: SkillId,
) -> Result<(WorldState, Terminal)> {
    let mut s = state.clone();
    for _ in 0..cfg.skill_max_steps {
        if s.step_count >= cfg.horizon {
            break;
        }
        let action = match policy(cfg, skill, &sim::observe(cfg, &s)) {
            Command::Done => break,
            Command::Act(a) => a,
        };
        let out = sim::apply(cfg, &s, action)?;
        s = out.next;
        if out.terminal != Terminal::None {
            return Ok((s, out.terminal));
        }
    }
    Ok((s, Terminal::None))
}

/// Runs controllers `start..=k` (1-based) from `state` and records every
/// transition.
pub fn execute_suffix(
    cfg: &TaskConfig,
    state: &WorldState,
    start: usize,
) -> Result<ExecutionTrace> {
    let mut transitions = Vec::new();
    let mut segments: Vec<Segment> = Vec::new();
    let rollout = run(cfg, state, start, |idx, s, action, out| {
        let n = transitions.len();
        match segments.last_mut() {
            Some(seg) if seg.plan_index == idx => seg.end = n + 1,
            _ => segments.push(Segment {
                skill: plan(cfg.task)[idx - 1],
                plan_index: idx,
                start: n,
                end: n + 1,
            }),
        }
        transitions.push(TraceStep {
            state: s.clone(),
            action,
            outcome: out.clone(),
        });
    })?;
    let failure_record = rollout.failure.map(|(idx, kind)| {
        let last = &transitions
            .last()
            .expect("a failure follows a transition")
            .outcome;
        FailureRecord {
            world_state: last.next.clone(),
            observation: last.observation.clone(),
            failure_kind: kind,
            plan_skill_index: idx,
            seed: state.episode_seed,
        }
    });
    Ok(ExecutionTrace {
        transitions,
        segments,
        outcome: rollout.outcome,
        failure_record,
    })
}

/// Same rollout as [`execute_suffix`] without recording the trace.
pub fn simulate_suffix(cfg: &TaskConfig, state: &WorldState, start: usize) -> Result<Rollout> {
    run(cfg, state, start, |_, _, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs_at(ee: Vec2, obj: Vec2) -> Observation {
        Observation {
            ee_position: ee,
            ee_yaw_index: 0,
            observed_object_position: obj,
            grasped: false,
            step_count: 0,
            obstacle_positions: Vec::new(),
            scene: Vec::new(),
        }
    }

    #[test]
    fn go_to_grasp_moves_along_span_first() {
        let cfg = TaskConfig::new(TaskKind::PickPlace2D);
        let c = policy(
            &cfg,
            SkillId::GoToGrasp,
            &obs_at(Vec2::new(0.10, 0.10), Vec2::new(0.10, 0.20)),
        );
        assert_eq!(
            c,
            Command::Act(SimAction::Primitive(Primitive::TranslatePlusB))
        );
        let c = policy(
            &cfg,
            SkillId::GoToGrasp,
            &obs_at(Vec2::new(0.10, 0.20), Vec2::new(0.105, 0.209)),
        );
        assert_eq!(c, Command::Done);
    }

    #[test]
    fn full_plan_far_from_walls_reaches_goal() {
        let cfg = TaskConfig::new(TaskKind::PickPlace2D);
        let mut s = sim::reset(&cfg, 0).unwrap().0;
        s.object_pose.center = Vec2::new(0.14, 0.17);
        let trace = execute_suffix(&cfg, &s, 1).unwrap();
        assert_eq!(trace.outcome, Outcome::Goal);
        assert!(trace.failure_record.is_none());
        let covered: usize = trace.segments.iter().map(|g| g.end - g.start).sum();
        assert_eq!(covered, trace.transitions.len());
        assert_eq!(trace.segments.len(), 4);
    }

    #[test]
    fn invalid_index_is_rejected() {
        let cfg = TaskConfig::new(TaskKind::Shelf2D);
        let s = sim::reset(&cfg, 0).unwrap().0;
        assert!(matches!(
            simulate_suffix(&cfg, &s, 0),
            Err(Error::InvalidOption { .. })
        ));
        assert!(matches!(
            simulate_suffix(&cfg, &s, 4),
            Err(Error::InvalidOption { .. })
        ));
    }

    #[test]
    fn simulate_matches_trace() {
        for task in TaskKind::ALL {
            let cfg = TaskConfig::new(task);
            for seed in 0..20 {
                let s = sim::reset(&cfg, seed).unwrap().0;
                let t = execute_suffix(&cfg, &s, 1).unwrap();
                let r = simulate_suffix(&cfg, &s, 1).unwrap();
                assert_eq!(t.outcome, r.outcome);
                assert_eq!(t.transitions.len() as u32, r.steps);
                if let Some(last) = t.transitions.last() {
                    assert_eq!(last.outcome.next, r.final_state);
                }
            }
        }
    }
}
