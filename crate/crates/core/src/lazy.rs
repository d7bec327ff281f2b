//! Precision-gated precondition classifiers for lazy option evaluation.
//!
//! One classifier per nominal option learns, from genuine option rollouts,
//! whether the option succeeds from an observation. Once its holdout
//! precision clears [`PRECISION_TARGET`], confident predictions replace the
//! rollout with a cached positive reward, except for a random fraction of
//! forced audit rollouts.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{BoostParams, BoostedClassifier};
use crate::seeding;

pub const PRECISION_TARGET: f64 = 0.95;
pub const FORCED_ROLLOUT_PROB: f64 = 0.2;
pub const MIN_SAMPLES: usize = 50;
pub const RETRAIN_EVERY: usize = 10;
pub const HOLDOUT_FRACTION: f64 = 0.2;
/// Most recent samples a classifier is refit on.
pub const FIT_WINDOW: usize = 4000;

/// Where an outcome came from. Only rollouts may become training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Rollout,
    Lazy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreconditionClassifier {
    /// 1-based option index.
    pub option_index: usize,
    pub model: Option<BoostedClassifier>,
    pub threshold: f64,
    pub holdout_precision: f64,
    pub enabled: bool,
    pub training_set: Vec<Sample>,
}

impl PreconditionClassifier {
    pub fn new(option_index: usize) -> Self {
        Self {
            option_index,
            model: None,
            threshold: 1.0,
            holdout_precision: 0.0,
            enabled: false,
            training_set: Vec::new(),
        }
    }

    pub fn record_outcome(
        &mut self,
        features: Vec<f64>,
        success: bool,
        provenance: Provenance,
    ) -> Result<()> {
        if provenance == Provenance::Lazy {
            return Err(Error::LazyOutcomeRecorded);
        }
        self.training_set.push(Sample { features, success });
        Ok(())
    }

    /// Refits on a shuffled 80% split and picks the smallest threshold whose
    /// precision on the remaining 20% reaches the target.
    pub fn retrain(&mut self, seed: u64, params: &BoostParams) {
        let start = self.training_set.len().saturating_sub(FIT_WINDOW);
        let data = &self.training_set[start..];
        let pos = data.iter().filter(|s| s.success).count();
        if data.len() < MIN_SAMPLES || pos == 0 || pos == data.len() {
            self.enabled = false;
            return;
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut seeding::stream(seed, "lazy-split"));
        let n_hold = ((data.len() as f64) * HOLDOUT_FRACTION).round() as usize;
        let (hold, fit) = order.split_at(n_hold);
        let x: Vec<Vec<f64>> = fit.iter().map(|&i| data[i].features.clone()).collect();
        let y: Vec<bool> = fit.iter().map(|&i| data[i].success).collect();
        let model = BoostedClassifier::fit(&x, &y, params);
        let scored: Vec<(f64, bool)> = hold
            .iter()
            .map(|&i| (model.predict_proba(&data[i].features), data[i].success))
            .collect();
        match select_threshold(&scored, PRECISION_TARGET) {
            Some((tau, precision)) => {
                self.threshold = tau;
                self.holdout_precision = precision;
                self.enabled = true;
            }
            None => {
                self.threshold = 1.0;
                self.holdout_precision = best_precision(&scored);
                self.enabled = false;
            }
        }
        self.model = Some(model);
    }

    pub fn probability(&self, features: &[f64]) -> Option<f64> {
        self.model.as_ref().map(|m| m.predict_proba(features))
    }
}

/// Smallest threshold `τ` (among the scores) such that predicting positive
/// for `p >= τ` has precision at least `target`. Returns `(τ, precision)`.
pub fn select_threshold(scored: &[(f64, bool)], target: f64) -> Option<(f64, f64)> {
    let mut taus: Vec<f64> = scored.iter().map(|s| s.0).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    taus.into_iter().find_map(|tau| {
        let (tp, fp) = scored
            .iter()
            .filter(|s| s.0 >= tau)
            .fold(
                (0, 0),
                |(tp, fp), s| if s.1 { (tp + 1, fp) } else { (tp, fp + 1) },
            );
        let precision = f64::from(tp) / f64::from(tp + fp);
        (tp + fp > 0 && precision >= target).then_some((tau, precision))
    })
}

fn best_precision(scored: &[(f64, bool)]) -> f64 {
    let mut best: f64 = 0.0;
    for &(tau, _) in scored {
        let (tp, n) = scored
            .iter()
            .filter(|s| s.0 >= tau)
            .fold((0, 0), |(tp, n), s| (tp + u32::from(s.1), n + 1));
        best = best.max(f64::from(tp) / f64::from(n));
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDecision {
    LazyPositive,
    /// Run the option. `confident` marks a forced audit of a state the
    /// classifier would have accepted.
    DoRollout {
        confident: bool,
    },
}

/// Counters for the forced audits of confident predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Audit {
    pub audited: u64,
    pub audited_successes: u64,
    pub lazy_positives: u64,
    pub queries: u64,
}

impl Audit {
    pub fn precision(&self) -> Option<f64> {
        (self.audited > 0).then(|| self.audited_successes as f64 / self.audited as f64)
    }
}

/// The per-option classifiers plus the gate's random stream.
#[derive(Debug, Clone)]
pub struct LazyGate {
    pub classifiers: Vec<PreconditionClassifier>,
    pub params: BoostParams,
    pub audit: Audit,
    seed: u64,
    retrains: u64,
    rng: ChaCha8Rng,
}

impl LazyGate {
    pub fn new(num_options: usize, seed: u64) -> Self {
        Self {
            classifiers: (1..=num_options).map(PreconditionClassifier::new).collect(),
            params: BoostParams::default(),
            audit: Audit::default(),
            seed,
            retrains: 0,
            rng: seeding::stream(seed, "lazy-gate"),
        }
    }

    /// Decides whether option `i` (1-based) must be simulated.
    pub fn gate(&mut self, i: usize, features: &[f64]) -> GateDecision {
        self.audit.queries += 1;
        let c = &self.classifiers[i - 1];
        if !c.enabled {
            return GateDecision::DoRollout { confident: false };
        }
        let p = c.probability(features).unwrap_or(0.0);
        if p < c.threshold {
            return GateDecision::DoRollout { confident: false };
        }
        if self.rng.random::<f64>() < FORCED_ROLLOUT_PROB {
            GateDecision::DoRollout { confident: true }
        } else {
            self.audit.lazy_positives += 1;
            GateDecision::LazyPositive
        }
    }

    /// Stores a rollout outcome; audits are tallied when `confident`.
    pub fn record(
        &mut self,
        i: usize,
        features: Vec<f64>,
        success: bool,
        confident: bool,
    ) -> Result<()> {
        if confident {
            self.audit.audited += 1;
            self.audit.audited_successes += u64::from(success);
        }
        self.classifiers[i - 1].record_outcome(features, success, Provenance::Rollout)
    }

    /// Retrains every classifier on the fixed cadence.
    pub fn on_policy_update(&mut self, update: usize) {
        if update == 0 || !update.is_multiple_of(RETRAIN_EVERY) {
            return;
        }
        self.retrains += 1;
        for c in &mut self.classifiers {
            let seed = seeding::derive_indexed(
                self.seed,
                &format!("retrain-{}", c.option_index),
                self.retrains,
            );
            c.retrain(seed, &self.params);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_precision_is_inclusive() {
        // 19 true positives and one false positive above 0.5.
        let mut scored: Vec<(f64, bool)> =
            (0..19).map(|i| (0.6 + 0.01 * f64::from(i), true)).collect();
        scored.push((0.55, false));
        scored.extend((0..10).map(|i| (0.1 + 0.01 * f64::from(i), false)));
        let (tau, p) = select_threshold(&scored, 0.95).unwrap();
        assert_eq!(tau, 0.55);
        assert_eq!(p, 0.95);
    }

    #[test]
    fn lazy_outcomes_are_rejected() {
        let mut c = PreconditionClassifier::new(1);
        assert!(matches!(
            c.record_outcome(vec![0.0], true, Provenance::Lazy),
            Err(Error::LazyOutcomeRecorded)
        ));
        c.record_outcome(vec![0.0], true, Provenance::Rollout)
            .unwrap();
        assert_eq!(c.training_set.len(), 1);
    }

    #[test]
    fn single_class_stays_disabled() {
        let mut c = PreconditionClassifier::new(1);
        for i in 0..100 {
            c.record_outcome(vec![f64::from(i)], false, Provenance::Rollout)
                .unwrap();
        }
        c.retrain(0, &BoostParams::default());
        assert!(!c.enabled);
    }

    #[test]
    fn separable_data_enables_gate() {
        let mut g = LazyGate::new(1, 3);
        for i in 0..200 {
            let x = f64::from(i) / 200.0;
            g.record(1, vec![x], x > 0.5, false).unwrap();
        }
        g.on_policy_update(10);
        assert!(g.classifiers[0].enabled);
        assert_eq!(g.classifiers[0].holdout_precision, 1.0);
        let lazy = (0..10_000)
            .filter(|_| g.gate(1, &[0.9]) == GateDecision::LazyPositive)
            .count();
        assert!((7700..=8300).contains(&lazy), "{lazy}");
        assert_eq!(
            g.gate(1, &[0.1]),
            GateDecision::DoRollout { confident: false }
        );
    }
}
