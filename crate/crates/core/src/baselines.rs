//! Comparison methods: pretrained preconditions (PP) and flat RL (RLR).
//!
//! PP learns one success classifier per controller from nominal
//! executions, freezes them, and rewards the recovery policy for reaching
//! any state a classifier accepts. RLR is the recovery MDP without options.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discovery::FailureRecord;
use crate::error::Result;
use crate::gbdt::{BoostParams, BoostedClassifier};
use crate::geometry::Vec2;
use crate::rc_mdp::{mc_precondition, RcEnv, Variant};
use crate::seeding;
use crate::sim::{self, TaskConfig, Terminal};
use crate::skills;

/// Nominal trajectory counts of the PP ablation.
pub const PP_DATASET_SIZES: [usize; 3] = [250, 400, 600];
/// Half-width of the uniform hand and object displacements applied at skill
/// switches. A grasped object moves with the hand only.
pub const PP_JITTER: f64 = 0.04;
/// Chance that a given skill switch is jittered.
pub const PP_JITTER_PROB: f64 = 1.0;
pub const PP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpSample {
    /// 1-based plan index of the controller about to start.
    pub skill_index: usize,
    pub features: Vec<f64>,
    pub success: bool,
}

fn jitter_offset(rng: &mut impl Rng) -> Vec2 {
    Vec2::new(
        rng.random_range(-PP_JITTER..=PP_JITTER),
        rng.random_range(-PP_JITTER..=PP_JITTER),
    )
}

/// Observations at every controller switch of `n` nominal executions. Each
/// switch state yields one sample per controller, labelled with whether that
/// controller's suffix reaches the goal from there.
pub fn collect_pp_dataset(cfg: &TaskConfig, n: usize, seed: u64) -> Result<Vec<PpSample>> {
    let plan = skills::plan(cfg.task);
    let mut jitter = seeding::stream(seed, "pp-jitter");
    let mut out = Vec::new();
    for e in 0..n {
        let (mut state, _) =
            sim::reset(cfg, seeding::derive_indexed(seed, "pp-episode", e as u64))?;
        for &skill in plan {
            if jitter.random::<f64>() < PP_JITTER_PROB {
                let hand = jitter_offset(&mut jitter);
                let object = jitter_offset(&mut jitter);
                if let Some(s) = sim::displace(cfg, &state, hand) {
                    state = s;
                }
                if let Some(s) = sim::displace_object(cfg, &state, object) {
                    state = s;
                }
            }
            let features = sim::observe(cfg, &state).features(cfg.task);
            for i in 1..=plan.len() {
                let success = mc_precondition(cfg, &state, i)? == 1;
                out.push(PpSample {
                    skill_index: i,
                    features: features.clone(),
                    success,
                });
            }
            let (next, terminal) = skills::run_skill(cfg, &state, skill)?;
            if terminal != Terminal::None {
                break;
            }
            state = next;
        }
    }
    Ok(out)
}

/// Frozen per-controller success classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpModel {
    pub dataset_size: usize,
    pub classifiers: Vec<BoostedClassifier>,
}

impl PpModel {
    pub fn fit(
        num_skills: usize,
        samples: &[PpSample],
        dataset_size: usize,
        params: &BoostParams,
    ) -> Self {
        let classifiers = (1..=num_skills)
            .map(|i| {
                let (x, y): (Vec<Vec<f64>>, Vec<bool>) = samples
                    .iter()
                    .filter(|s| s.skill_index == i)
                    .map(|s| (s.features.clone(), s.success))
                    .unzip();
                BoostedClassifier::fit(&x, &y, params)
            })
            .collect();
        Self {
            dataset_size,
            classifiers,
        }
    }

    pub fn train(cfg: &TaskConfig, dataset_size: usize, seed: u64) -> Result<Self> {
        let samples = collect_pp_dataset(cfg, dataset_size, seed)?;
        Ok(Self::fit(
            skills::plan(cfg.task).len(),
            &samples,
            dataset_size,
            &BoostParams::default(),
        ))
    }

    /// Most confident controller as `(1-based index, probability)`.
    pub fn best_skill(&self, features: &[f64]) -> (usize, f64) {
        self.classifiers
            .iter()
            .enumerate()
            .map(|(i, c)| (i + 1, c.predict_proba(features)))
            .fold((1, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    pub fn accepts(&self, features: &[f64]) -> bool {
        self.best_skill(features).1 >= PP_THRESHOLD
    }
}

pub fn pp_env(
    cfg: TaskConfig,
    records: Arc<Vec<FailureRecord>>,
    model: Arc<PpModel>,
    seed: u64,
) -> Result<RcEnv> {
    RcEnv::new(cfg, records, Variant::Pretrained(model), seed)
}

pub fn rlr_env(cfg: TaskConfig, records: Arc<Vec<FailureRecord>>, seed: u64) -> Result<RcEnv> {
    RcEnv::new(cfg, records, Variant::PrimitivesOnly, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TaskKind;

    #[test]
    fn dataset_labels_every_switch_for_every_skill() {
        let cfg = TaskConfig::new(TaskKind::PickPlace2D);
        let d = collect_pp_dataset(&cfg, 20, 5).unwrap();
        assert!(d.iter().all(|s| (1..=4).contains(&s.skill_index)));
        assert_eq!(d.len() % 4, 0);
        assert!(d.len() >= 4 * 20);
        assert_eq!(d, collect_pp_dataset(&cfg, 20, 5).unwrap());
    }
}
