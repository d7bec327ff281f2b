//! Oracles shared by the PPO tests and the acceptance run.
#![allow(dead_code)]

use rand::Rng;
use rechain::ppo::{log_softmax, Batch, PolicyNetwork};
use rechain::seeding;

pub const H: f64 = 1e-5;

pub struct Fixture {
    pub net: PolicyNetwork,
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Fixture {
    /// Two hidden layers, eight samples. With `offset_ratios` the old
    /// log-probabilities are shifted so every ratio sits well inside or well
    /// outside the clip range, away from the kinks of the surrogate.
    pub fn new(seed: u64, offset_ratios: bool) -> Self {
        let mut rng = seeding::stream(seed, "fd-fixture");
        let net = PolicyNetwork::new(5, 4, &[7, 6], &mut rng);
        let n = 8;
        let obs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let actions: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let offsets = [0.0, 0.05, -0.05, 0.6, -0.6, 0.1, -0.4, 0.02];
        let old_log_probs = obs
            .iter()
            .zip(&actions)
            .zip(offsets)
            .map(|((o, &a), d)| {
                let (logits, _) = net.forward(o).unwrap();
                log_softmax(&logits)[a] + if offset_ratios { d } else { 0.0 }
            })
            .collect();
        let advantages = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let returns = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self {
            net,
            obs,
            actions,
            old_log_probs,
            advantages,
            returns,
        }
    }

    pub fn batch(&self) -> Batch<'_> {
        Batch {
            obs: &self.obs,
            actions: &self.actions,
            old_log_probs: &self.old_log_probs,
            advantages: &self.advantages,
            returns: &self.returns,
        }
    }
}

pub fn central_difference(net: &PolicyNetwork, f: impl Fn(&PolicyNetwork) -> f64) -> Vec<f64> {
    let p0 = net.params();
    let mut probe = net.clone();
    (0..p0.len())
        .map(|i| {
            let mut p = p0.clone();
            p[i] = p0[i] + H;
            probe.set_params(&p);
            let up = f(&probe);
            p[i] = p0[i] - H;
            probe.set_params(&p);
            let down = f(&probe);
            (up - down) / (2.0 * H)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` in the L2 norm.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

fn td_error(r: &[f64], v: &[f64], d: &[bool], last: f64, gamma: f64, t: usize) -> f64 {
    let next = if d[t] {
        0.0
    } else if t + 1 < r.len() {
        v[t + 1]
    } else {
        last
    };
    r[t] + gamma * next - v[t]
}

/// Advantages straight from the definition: discounted sums of TD errors,
/// truncated at the first episode end.
pub fn brute_force_gae(
    r: &[f64],
    v: &[f64],
    d: &[bool],
    last: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    (0..r.len())
        .map(|t| {
            let mut total = 0.0;
            let mut w = 1.0;
            for l in t..r.len() {
                total += w * td_error(r, v, d, last, gamma, l);
                if d[l] {
                    break;
                }
                w *= gamma * lambda;
            }
            total
        })
        .collect()
}

pub fn td_errors(r: &[f64], v: &[f64], d: &[bool], last: f64, gamma: f64) -> Vec<f64> {
    (0..r.len())
        .map(|t| td_error(r, v, d, last, gamma, t))
        .collect()
}

/// Discounted returns bootstrapped with `last` and cut at episode ends.
pub fn monte_carlo_returns(r: &[f64], d: &[bool], last: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; r.len()];
    let mut g = last;
    for t in (0..r.len()).rev() {
        g = r[t] + gamma * if d[t] { 0.0 } else { g };
        out[t] = g;
    }
    out
}

/// A random rollout of dyadic rationals; with `gamma = 0.5` every GAE
/// operation on it is exact.
pub fn dyadic_rollout(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<bool>, f64) {
    let mut rng = seeding::stream(seed, "dyadic");
    let r = (0..n)
        .map(|_| f64::from(rng.random_range(0..2u8)))
        .collect();
    let v = (0..n)
        .map(|_| f64::from(rng.random_range(-8..8i8)) / 8.0)
        .collect();
    let d = (0..n).map(|_| rng.random_bool(0.2)).collect();
    let last = f64::from(rng.random_range(-8..8i8)) / 8.0;
    (r, v, d, last)
}
