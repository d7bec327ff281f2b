//! The recovery MDP built on top of failure records.
//!
//! Episodes start from a uniformly drawn failure state. The agent picks
//! either a motion primitive or one of the nominal options; an option runs
//! the remaining nominal plan from that controller on and ends the episode
//! with the task goal as reward. Primitive steps are free of reward unless
//! they reach the goal directly. Episodes that do neither within the
//! recovery horizon end with reward 0.
//!
//! The same environment also hosts the lazy variant (options gated by
//! learned preconditions) and the two baselines (pretrained preconditions,
//! primitives only).

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::PpModel;
use crate::discovery::{reset_to_failure, FailureRecord};
use crate::error::{Error, Result};
use crate::lazy::{GateDecision, LazyGate};
use crate::ppo::{self, EnvStep, Environment, PolicyNetwork};
use crate::seeding;
use crate::sim::{self, Observation, Primitive, TaskConfig, TaskKind, Terminal, WorldState};
use crate::skills::{self, Outcome};

pub const RECOVERY_HORIZON: u32 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RcAction {
    Primitive(Primitive),
    /// 1-based plan index of the option's first controller.
    NominalOption(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalKind {
    None,
    Goal,
    Fail,
    /// Option rollout without goal, or horizon exhausted.
    Dead,
    /// A pretrained precondition accepted the state.
    Precondition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RcInfo {
    pub mc_rollout_performed: bool,
    pub rollout_steps_used: u32,
    pub lazy_positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcStepResult {
    /// `None` once the episode is over.
    pub observation: Option<Observation>,
    pub reward: f64,
    pub done: bool,
    pub terminal_kind: TerminalKind,
    pub info: RcInfo,
}

/// Which learning problem the environment poses.
#[derive(Debug, Clone)]
pub enum Variant {
    Rc,
    Lazy(Box<LazyGate>),
    Pretrained(Arc<PpModel>),
    PrimitivesOnly,
}

impl Variant {
    pub fn has_options(&self) -> bool {
        matches!(self, Variant::Rc | Variant::Lazy(_))
    }
}

/// Primitives first, then options `1..=n` if enabled.
pub fn action_space(task: TaskKind, with_options: bool) -> Vec<RcAction> {
    let mut a: Vec<RcAction> = task
        .primitives()
        .iter()
        .map(|&p| RcAction::Primitive(p))
        .collect();
    if with_options {
        a.extend((1..=skills::plan(task).len()).map(RcAction::NominalOption));
    }
    a
}

/// Runs the nominal suffix from controller `i` and reports the task goal.
pub fn mc_precondition(cfg: &TaskConfig, state: &WorldState, i: usize) -> Result<u8> {
    Ok(u8::from(
        skills::simulate_suffix(cfg, state, i)?.outcome == Outcome::Goal,
    ))
}

#[derive(Debug, Clone)]
pub struct RcEnv {
    cfg: TaskConfig,
    records: Arc<Vec<FailureRecord>>,
    variant: Variant,
    actions: Vec<RcAction>,
    horizon: u32,
    rng: ChaCha8Rng,
    state: Option<WorldState>,
    steps: u32,
}

impl RcEnv {
    pub fn new(
        cfg: TaskConfig,
        records: Arc<Vec<FailureRecord>>,
        variant: Variant,
        seed: u64,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let actions = action_space(cfg.task, variant.has_options());
        Ok(Self {
            cfg,
            records,
            variant,
            actions,
            horizon: RECOVERY_HORIZON,
            rng: seeding::stream(seed, "rc-reset"),
            state: None,
            steps: 0,
        })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.cfg
    }

    pub fn actions(&self) -> &[RcAction] {
        &self.actions
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn lazy_gate(&self) -> Option<&LazyGate> {
        match &self.variant {
            Variant::Lazy(g) => Some(g),
            _ => None,
        }
    }

    pub fn state(&self) -> Option<&WorldState> {
        self.state.as_ref()
    }

    /// Starts an episode from a uniformly drawn failure record. Returns the
    /// record index with the observation.
    pub fn rc_reset(&mut self) -> Result<(usize, Observation)> {
        let k = self.rng.random_range(0..self.records.len());
        let obs = self.reset_to(k)?;
        Ok((k, obs))
    }

    pub fn reset_to(&mut self, k: usize) -> Result<Observation> {
        let (state, obs) = reset_to_failure(&self.cfg, &self.records[k])?;
        self.state = Some(state);
        self.steps = 0;
        Ok(obs)
    }

    fn finish(&mut self, kind: TerminalKind, info: RcInfo) -> RcStepResult {
        self.state = None;
        let reward = if matches!(kind, TerminalKind::Goal | TerminalKind::Precondition) {
            1.0
        } else {
            0.0
        };
        RcStepResult {
            observation: None,
            reward,
            done: true,
            terminal_kind: kind,
            info,
        }
    }

    pub fn rc_step(&mut self, action: RcAction) -> Result<RcStepResult> {
        let state = self.state.as_ref().ok_or(Error::TerminalState)?;
        match action {
            RcAction::Primitive(p) => {
                if !self.cfg.task.primitives().contains(&p) {
                    return Err(Error::InvalidAction {
                        action: format!("{p:?}"),
                        task: self.cfg.task,
                    });
                }
                let out = sim::step(&self.cfg, state, p)?;
                self.steps += 1;
                let info = RcInfo::default();
                match out.terminal {
                    Terminal::Goal => return Ok(self.finish(TerminalKind::Goal, info)),
                    Terminal::Failure => return Ok(self.finish(TerminalKind::Fail, info)),
                    Terminal::None => {}
                }
                if let Variant::Pretrained(m) = &self.variant {
                    if m.accepts(&out.observation.features(self.cfg.task)) {
                        return Ok(self.finish(TerminalKind::Precondition, info));
                    }
                }
                if self.steps >= self.horizon {
                    return Ok(self.finish(TerminalKind::Dead, info));
                }
                self.state = Some(out.next);
                Ok(RcStepResult {
                    observation: Some(out.observation),
                    reward: 0.0,
                    done: false,
                    terminal_kind: TerminalKind::None,
                    info,
                })
            }
            RcAction::NominalOption(i) => {
                if !self.variant.has_options() {
                    return Err(Error::InvalidAction {
                        action: format!("option {i}"),
                        task: self.cfg.task,
                    });
                }
                let features = sim::observe(&self.cfg, state).features(self.cfg.task);
                let decision = match &mut self.variant {
                    Variant::Lazy(g) => g.gate(i, &features),
                    _ => GateDecision::DoRollout { confident: false },
                };
                self.steps += 1;
                match decision {
                    GateDecision::LazyPositive => {
                        let info = RcInfo {
                            lazy_positive: true,
                            ..RcInfo::default()
                        };
                        Ok(self.finish(TerminalKind::Goal, info))
                    }
                    GateDecision::DoRollout { confident } => {
                        let r = skills::simulate_suffix(&self.cfg, state, i)?;
                        let success = r.outcome == Outcome::Goal;
                        if let Variant::Lazy(g) = &mut self.variant {
                            g.record(i, features, success, confident)?;
                        }
                        let info = RcInfo {
                            mc_rollout_performed: true,
                            rollout_steps_used: r.steps,
                            lazy_positive: false,
                        };
                        Ok(self.finish(
                            if success {
                                TerminalKind::Goal
                            } else {
                                TerminalKind::Dead
                            },
                            info,
                        ))
                    }
                }
            }
        }
    }
}

impl Environment for RcEnv {
    fn observation_dim(&self) -> usize {
        sim::feature_dim(self.cfg.task)
    }

    fn num_actions(&self) -> usize {
        self.actions.len()
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        Ok(self.rc_reset()?.1.features(self.cfg.task))
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let a = *self
            .actions
            .get(action)
            .ok_or_else(|| Error::InvalidAction {
                action: action.to_string(),
                task: self.cfg.task,
            })?;
        let r = self.rc_step(a)?;
        Ok(EnvStep {
            obs: r
                .observation
                .map(|o| o.features(self.cfg.task))
                .unwrap_or_default(),
            reward: r.reward,
            done: r.done,
            rollout_steps: u64::from(r.info.rollout_steps_used),
            option: match a {
                RcAction::NominalOption(i) => Some(i),
                RcAction::Primitive(_) => None,
            },
            lazy_positive: r.info.lazy_positive,
        })
    }

    fn on_policy_update(&mut self, update: usize) -> Result<()> {
        if let Variant::Lazy(g) = &mut self.variant {
            g.on_policy_update(update);
        }
        Ok(())
    }
}

/// How a trained policy is executed at evaluation time.
#[derive(Debug, Clone, Copy)]
pub enum Execution<'a> {
    /// Options are real suffix rollouts.
    Options,
    PrimitivesOnly,
    /// Primitives until the pretrained model accepts a state, then the
    /// suffix of its most confident controller.
    Pretrained(&'a PpModel),
}

/// Result of one greedy recovery attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attempt {
    pub success: bool,
    /// Option chosen by the policy, if any.
    pub option: Option<usize>,
}

/// Greedy recovery from one failure record, with real task outcomes.
pub fn recover(
    cfg: &TaskConfig,
    net: &PolicyNetwork,
    record: &FailureRecord,
    exec: Execution<'_>,
) -> Result<Attempt> {
    let actions = action_space(cfg.task, matches!(exec, Execution::Options));
    let (mut state, mut obs) = reset_to_failure(cfg, record)?;
    for _ in 0..RECOVERY_HORIZON {
        let features = obs.features(cfg.task);
        let (logits, _) = net.forward(&features)?;
        match actions[ppo::argmax(&logits)] {
            RcAction::NominalOption(i) => {
                let success = mc_precondition(cfg, &state, i)? == 1;
                return Ok(Attempt {
                    success,
                    option: Some(i),
                });
            }
            RcAction::Primitive(p) => {
                let out = sim::step(cfg, &state, p)?;
                match out.terminal {
                    Terminal::Goal => {
                        return Ok(Attempt {
                            success: true,
                            option: None,
                        })
                    }
                    Terminal::Failure => {
                        return Ok(Attempt {
                            success: false,
                            option: None,
                        })
                    }
                    Terminal::None => {}
                }
                if let Execution::Pretrained(m) = exec {
                    let f = out.observation.features(cfg.task);
                    if m.accepts(&f) {
                        let i = m.best_skill(&f).0;
                        let success = mc_precondition(cfg, &out.next, i)? == 1;
                        return Ok(Attempt {
                            success,
                            option: Some(i),
                        });
                    }
                }
                state = out.next;
                obs = out.observation;
            }
        }
    }
    Ok(Attempt {
        success: false,
        option: None,
    })
}

/// Fraction of records the greedy policy recovers.
pub fn recovery_rate(
    cfg: &TaskConfig,
    net: &PolicyNetwork,
    records: &[FailureRecord],
    exec: Execution<'_>,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut ok = 0usize;
    for r in records {
        ok += usize::from(recover(cfg, net, r, exec)?.success);
    }
    Ok(ok as f64 / records.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::discover_failures;

    fn env(variant: Variant) -> RcEnv {
        let cfg = TaskConfig::new(TaskKind::PickPlace2D);
        let ds = discover_failures(&cfg, 60, 0, Some(10)).unwrap();
        RcEnv::new(cfg, Arc::new(ds.records), variant, 1).unwrap()
    }

    #[test]
    fn action_counts() {
        assert_eq!(action_space(TaskKind::PickPlace2D, true).len(), 10);
        assert_eq!(action_space(TaskKind::PickPlace2D, false).len(), 6);
        assert_eq!(action_space(TaskKind::Shelf2D, false).len(), 4);
        assert_eq!(action_space(TaskKind::ClutteredShelf2D, true).len(), 7);
    }

    #[test]
    fn option_ends_episode() {
        let mut e = env(Variant::Rc);
        e.rc_reset().unwrap();
        let r = e.rc_step(RcAction::NominalOption(1)).unwrap();
        assert!(r.done && r.info.mc_rollout_performed);
        assert!(matches!(
            e.rc_step(RcAction::NominalOption(1)),
            Err(Error::TerminalState)
        ));
    }

    #[test]
    fn primitives_only_rejects_options() {
        let mut e = env(Variant::PrimitivesOnly);
        e.rc_reset().unwrap();
        assert!(e.rc_step(RcAction::NominalOption(1)).is_err());
        assert_eq!(e.num_actions(), 6);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let cfg = TaskConfig::new(TaskKind::PickPlace2D);
        assert!(matches!(
            RcEnv::new(cfg, Arc::new(Vec::new()), Variant::Rc, 0),
            Err(Error::EmptyDataset)
        ));
    }
}
