use proptest::prelude::*;
use rechain::lazy::{
    select_threshold, GateDecision, LazyGate, FORCED_ROLLOUT_PROB, MIN_SAMPLES, RETRAIN_EVERY,
};

fn precision_at(scored: &[(f64, bool)], tau: f64) -> Option<f64> {
    let above: Vec<bool> = scored.iter().filter(|s| s.0 >= tau).map(|s| s.1).collect();
    (!above.is_empty()).then(|| above.iter().filter(|&&y| y).count() as f64 / above.len() as f64)
}

proptest! {
    #[test]
    fn threshold_is_the_smallest_precise_score(
        scored in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..60),
        target in 0.5f64..1.0,
    ) {
        let oracle = scored
            .iter()
            .map(|s| s.0)
            .filter(|&t| precision_at(&scored, t).is_some_and(|p| p >= target))
            .fold(None, |best: Option<f64>, t| Some(best.map_or(t, |b| b.min(t))));
        match (select_threshold(&scored, target), oracle) {
            (Some((tau, p)), Some(o)) => {
                prop_assert_eq!(tau, o);
                prop_assert_eq!(Some(p), precision_at(&scored, tau));
            }
            (None, None) => {}
            (got, want) => prop_assert!(false, "got {:?}, oracle {:?}", got, want),
        }
    }
}

fn separable_gate(n: usize) -> LazyGate {
    let mut g = LazyGate::new(2, 11);
    for i in 0..n {
        let x = i as f64 / n as f64;
        g.record(1, vec![x, 0.0], x > 0.3, false).unwrap();
    }
    g
}

#[test]
fn gate_waits_for_enough_samples_and_the_retrain_cadence() {
    let mut g = separable_gate(MIN_SAMPLES - 1);
    g.on_policy_update(RETRAIN_EVERY);
    assert!(!g.classifiers[0].enabled);

    let mut g = separable_gate(400);
    for u in 1..RETRAIN_EVERY {
        g.on_policy_update(u);
        assert!(!g.classifiers[0].enabled, "retrained at update {u}");
    }
    g.on_policy_update(RETRAIN_EVERY);
    assert!(g.classifiers[0].enabled);
    assert!(!g.classifiers[1].enabled, "option without data stays off");
    assert_eq!(
        g.gate(2, &[0.9, 0.0]),
        GateDecision::DoRollout { confident: false }
    );
}

#[test]
fn forced_audits_follow_the_rollout_probability() {
    let mut g = separable_gate(400);
    g.on_policy_update(RETRAIN_EVERY);
    let n = 20_000;
    let audits = (0..n)
        .filter(|_| g.gate(1, &[0.95, 0.0]) == GateDecision::DoRollout { confident: true })
        .count() as f64;
    let (mean, sd) = (
        n as f64 * FORCED_ROLLOUT_PROB,
        (n as f64 * FORCED_ROLLOUT_PROB * (1.0 - FORCED_ROLLOUT_PROB)).sqrt(),
    );
    assert!((audits - mean).abs() < 4.0 * sd, "{audits} audits");
    assert_eq!(g.audit.lazy_positives as f64 + audits, n as f64);
    assert_eq!(g.audit.queries, n as u64);
}

#[test]
fn audits_tally_only_confident_rollouts() {
    let mut g = LazyGate::new(1, 0);
    g.record(1, vec![0.0], true, true).unwrap();
    g.record(1, vec![0.0], false, true).unwrap();
    g.record(1, vec![0.0], false, false).unwrap();
    assert_eq!(g.audit.audited, 2);
    assert_eq!(g.audit.audited_successes, 1);
    assert_eq!(g.audit.precision(), Some(0.5));
    assert_eq!(g.classifiers[0].training_set.len(), 3);
}
