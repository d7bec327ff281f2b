mod common;

use common::{
    brute_force_gae, central_difference, dyadic_rollout, monte_carlo_returns, relative_error,
    td_errors, Fixture,
};
use proptest::prelude::*;
use rechain::ppo::{self, gae, log_softmax, PolicyNetwork, PpoConfig};

#[test]
fn loss_gradient_matches_finite_differences() {
    for seed in 0..4 {
        let fx = Fixture::new(seed, true);
        let cfg = PpoConfig {
            entropy_coef: 0.01,
            ..PpoConfig::default()
        };
        let (_, grad) = ppo::loss_and_grad(&fx.net, &fx.batch(), &cfg).unwrap();
        let fd = central_difference(&fx.net, |n| {
            ppo::loss_and_grad(n, &fx.batch(), &cfg).unwrap().0.total
        });
        let err = relative_error(&grad, &fd);
        assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn unclipped_loss_is_vanilla_policy_gradient() {
    // At ratio 1 with an infinite clip range and no value or entropy terms,
    // the gradient must equal that of -mean(A log pi(a)).
    let fx = Fixture::new(9, false);
    let cfg = PpoConfig {
        clip_epsilon: f64::INFINITY,
        value_coef: 0.0,
        entropy_coef: 0.0,
        ..PpoConfig::default()
    };
    let (_, grad) = ppo::loss_and_grad(&fx.net, &fx.batch(), &cfg).unwrap();
    let pg = |n: &PolicyNetwork| {
        -fx.obs
            .iter()
            .zip(&fx.actions)
            .zip(&fx.advantages)
            .map(|((o, &a), adv)| adv * log_softmax(&n.forward(o).unwrap().0)[a])
            .sum::<f64>()
            / fx.obs.len() as f64
    };
    let err = relative_error(&grad, &central_difference(&fx.net, pg));
    assert!(err < 1e-4, "relative error {err:e}");
}

#[test]
fn zero_entropy_coefficient_drops_the_entropy_term() {
    let fx = Fixture::new(4, true);
    let cfg = PpoConfig::default();
    assert_eq!(cfg.entropy_coef, 0.0);
    let (st, grad) = ppo::loss_and_grad(&fx.net, &fx.batch(), &cfg).unwrap();
    assert!(st.entropy > 0.0);
    assert_eq!(st.total, st.policy_loss + cfg.value_coef * st.value_loss);
    let tiny = PpoConfig {
        entropy_coef: 1e-3,
        ..cfg.clone()
    };
    let (_, g2) = ppo::loss_and_grad(&fx.net, &fx.batch(), &tiny).unwrap();
    assert_ne!(grad, g2);
}

fn rollout_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>, f64)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::sample::select(vec![0.0, 1.0]), n),
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(prop::bool::weighted(0.2), n),
            -2.0f64..2.0,
        )
    })
}

proptest! {
    #[test]
    fn gae_matches_brute_force(
        (r, v, d, last) in rollout_strategy(),
        gamma in 0.5f64..1.0,
        lambda in 0.0f64..=1.0,
    ) {
        let (adv, ret) = gae(&r, &v, &d, last, gamma, lambda);
        let oracle = brute_force_gae(&r, &v, &d, last, gamma, lambda);
        for t in 0..r.len() {
            prop_assert!((adv[t] - oracle[t]).abs() <= 1e-10, "t={} {} vs {}", t, adv[t], oracle[t]);
            prop_assert_eq!(ret[t], adv[t] + v[t]);
        }
    }

    #[test]
    fn lambda_zero_gives_td_errors_exactly((r, v, d, last) in rollout_strategy(), gamma in 0.5f64..1.0) {
        let (adv, _) = gae(&r, &v, &d, last, gamma, 0.0);
        prop_assert_eq!(adv, td_errors(&r, &v, &d, last, gamma));
    }

    #[test]
    fn lambda_one_gives_monte_carlo_returns_exactly(
        n in 1usize..30,
        seed in any::<u64>(),
    ) {
        // Dyadic values and gamma = 1/2 keep every operation exact, so the
        // telescoped TD sum must equal the discounted return bit for bit.
        let (r, v, d, last) = dyadic_rollout(seed, n);
        let (_, ret) = gae(&r, &v, &d, last, 0.5, 1.0);
        prop_assert_eq!(ret, monte_carlo_returns(&r, &d, last, 0.5));
    }
}

#[test]
fn lambda_one_matches_monte_carlo_with_default_discount() {
    let r = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let v = [0.3, -0.2, 0.9, 0.1, 0.5, 0.7, 0.2];
    let d = [false, false, true, false, false, false, false];
    let (_, ret) = gae(&r, &v, &d, 0.4, 0.99, 1.0);
    let expected = [
        0.99 * 0.99,
        0.99,
        1.0,
        0.99 * 0.99 * 0.99 + 0.99f64.powi(4) * 0.4,
        0.99 * 0.99 + 0.99f64.powi(3) * 0.4,
        0.99 + 0.99 * 0.99 * 0.4,
        1.0 + 0.99 * 0.4,
    ];
    for (a, b) in ret.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}
