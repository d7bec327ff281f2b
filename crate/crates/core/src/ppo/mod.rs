//! Proximal policy optimization over a discrete action space.
//!
//! Single-environment rollouts of fixed length, GAE, clipped surrogate with
//! value and entropy terms, Adam with global gradient-norm clipping. All
//! randomness (initialization, action sampling, minibatch order) derives
//! from [`PpoConfig::seed`].

mod gae;
mod network;

pub use gae::gae;
pub use network::{argmax, log_softmax, softmax, ForwardCache, Mlp, PolicyNetwork};

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub rollout_steps: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub gamma: f64,
    pub total_timesteps: usize,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            rollout_steps: 120,
            minibatch_size: 60,
            learning_rate: 3e-4,
            entropy_coef: 0.0,
            gamma: 0.99,
            total_timesteps: 100_000,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs: 10,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            seed: 0,
        }
    }
}

impl PpoConfig {
    /// Network width and training length of the original experiments.
    pub fn paper_scale(mut self) -> Self {
        self.hidden = vec![256, 256];
        self.total_timesteps = 500_000;
        self
    }

    /// The shorter training length reported alongside the full one.
    pub fn paper_scale_200k(mut self) -> Self {
        self.hidden = vec![256, 256];
        self.total_timesteps = 200_000;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rollout_steps > 0
            && self.minibatch_size > 0
            && self.minibatch_size <= self.rollout_steps
            && self.learning_rate > 0.0
            && self.entropy_coef >= 0.0
            && self.gamma > 0.0
            && self.gamma <= 1.0
            && (0.0..=1.0).contains(&self.gae_lambda)
            && self.clip_epsilon > 0.0
            && self.epochs > 0
            && self.value_coef >= 0.0
            && self.max_grad_norm > 0.0
            && !self.hidden.is_empty();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid PPO configuration: {self:?}"
            )))
        }
    }

    pub fn updates(&self) -> usize {
        self.total_timesteps.div_ceil(self.rollout_steps)
    }
}

/// What an environment reports for one agent step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Simulator steps spent inside nominal-option rollouts.
    pub rollout_steps: u64,
    /// 1-based nominal option invoked by this action, if any.
    pub option: Option<usize>,
    pub lazy_positive: bool,
}

pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn reset(&mut self) -> Result<Vec<f64>>;
    fn step(&mut self, action: usize) -> Result<EnvStep>;
    /// Called after every policy update with its 1-based index.
    fn on_policy_update(&mut self, _update: usize) -> Result<()> {
        Ok(())
    }
}

/// One rollout of training data.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn clear(&mut self) {
        *self = Self::default();
    }
}

/// A minibatch view with precomputed advantages and return targets.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub obs: &'a [Vec<f64>],
    pub actions: &'a [usize],
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
}

/// Mean-zero, unit-variance copy (`eps` guards the variance).
pub fn normalize(xs: &[f64], eps: f64) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt() + eps;
    xs.iter().map(|x| (x - mean) / sd).collect()
}

/// The PPO loss on `batch` and its exact gradient in the flat parameter
/// layout of [`PolicyNetwork::params`]. Advantages are used as given.
///
/// `L = -mean(min(r A, clip(r) A)) + c_v mean((V - R)^2) - c_e mean(H)`.
pub fn loss_and_grad(
    net: &PolicyNetwork,
    batch: &Batch,
    cfg: &PpoConfig,
) -> Result<(LossStats, Vec<f64>)> {
    let m = batch.actions.len() as f64;
    let mut grad = vec![0.0; net.param_count()];
    let mut st = LossStats::default();
    let mut cache = ForwardCache::default();
    let (lo, hi) = (1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
    for k in 0..batch.actions.len() {
        let (logits, value) = net.forward_cached(&batch.obs[k], &mut cache)?;
        let logp = log_softmax(&logits);
        let pi: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let a = batch.actions[k];
        let adv = batch.advantages[k];
        let ratio = (logp[a] - batch.old_log_probs[k]).exp();
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(lo, hi) * adv;
        // d(surrogate)/d(log pi_a): zero when the clipped branch is active.
        let dsurr = if unclipped <= clipped { unclipped } else { 0.0 };
        if clipped < unclipped {
            st.clip_fraction += 1.0;
        }
        let entropy = -pi.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        st.policy_loss -= unclipped.min(clipped) / m;
        st.entropy += entropy / m;
        let verr = value - batch.returns[k];
        st.value_loss += verr * verr / m;

        let dlogits: Vec<f64> = (0..logits.len())
            .map(|j| {
                let onehot = if j == a { 1.0 } else { 0.0 };
                let dpolicy = -dsurr * (onehot - pi[j]);
                let dent = cfg.entropy_coef * pi[j] * (logp[j] + entropy);
                (dpolicy + dent) / m
            })
            .collect();
        let dvalue = cfg.value_coef * 2.0 * verr / m;
        net.backward(&cache, &dlogits, dvalue, &mut grad);
    }
    st.clip_fraction /= m;
    st.total = st.policy_loss + cfg.value_coef * st.value_loss - cfg.entropy_coef * st.entropy;
    Ok((st, grad))
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

/// Per-update training log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateLog {
    pub update: usize,
    pub timesteps: usize,
    /// Mean return of the last 100 finished episodes.
    pub mean_reward: f64,
    pub episodes: u64,
    pub rollout_steps_cumulative: u64,
    pub option_invocations: u64,
    pub lazy_positives: u64,
    /// Invocations of each nominal option during this rollout.
    pub option_counts: Vec<u32>,
    pub loss: LossStats,
}

impl UpdateLog {
    pub fn lazy_hit_rate(&self) -> f64 {
        if self.option_invocations == 0 {
            0.0
        } else {
            self.lazy_positives as f64 / self.option_invocations as f64
        }
    }
}

/// Samples an action index from `logits`.
pub fn sample_action(logits: &[f64], rng: &mut impl Rng) -> (usize, f64) {
    let logp = log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, l) in logp.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return (i, *l);
        }
    }
    let last = logp.len() - 1;
    (last, logp[last])
}

/// One PPO update on a full rollout buffer.
pub fn update(
    net: &mut PolicyNetwork,
    opt: &mut Adam,
    buf: &RolloutBuffer,
    last_value: f64,
    cfg: &PpoConfig,
    rng: &mut impl Rng,
    update_index: usize,
) -> Result<LossStats> {
    let (adv, returns) = gae(
        &buf.rewards,
        &buf.values,
        &buf.dones,
        last_value,
        cfg.gamma,
        cfg.gae_lambda,
    );
    let n = buf.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = LossStats::default();
    let mut batches = 0.0;
    let mut params = net.params();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let obs: Vec<Vec<f64>> = chunk.iter().map(|&i| buf.obs[i].clone()).collect();
            let actions: Vec<usize> = chunk.iter().map(|&i| buf.actions[i]).collect();
            let old: Vec<f64> = chunk.iter().map(|&i| buf.log_probs[i]).collect();
            let raw: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
            let advantages = normalize(&raw, 1e-8);
            let rets: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();
            let batch = Batch {
                obs: &obs,
                actions: &actions,
                old_log_probs: &old,
                advantages: &advantages,
                returns: &rets,
            };
            let (st, mut grad) = loss_and_grad(net, &batch, cfg)?;
            if !st.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    update: update_index,
                    policy_loss: st.policy_loss,
                    value_loss: st.value_loss,
                });
            }
            clip_grad_norm(&mut grad, cfg.max_grad_norm);
            opt.step(&mut params, &grad);
            net.set_params(&params);
            stats.policy_loss += st.policy_loss;
            stats.value_loss += st.value_loss;
            stats.entropy += st.entropy;
            stats.total += st.total;
            stats.clip_fraction += st.clip_fraction;
            batches += 1.0;
        }
    }
    for v in [
        &mut stats.policy_loss,
        &mut stats.value_loss,
        &mut stats.entropy,
        &mut stats.total,
        &mut stats.clip_fraction,
    ] {
        *v /= batches;
    }
    Ok(stats)
}

/// Trains a fresh network on `env`. `on_update` runs after every update and
/// may evaluate the current policy.
pub fn train<E: Environment>(
    env: &mut E,
    cfg: &PpoConfig,
    mut on_update: impl FnMut(&PolicyNetwork, &UpdateLog) -> Result<()>,
) -> Result<PolicyNetwork> {
    cfg.validate()?;
    let mut net = PolicyNetwork::new(
        env.observation_dim(),
        env.num_actions(),
        &cfg.hidden,
        &mut seeding::stream(cfg.seed, "ppo-init"),
    );
    let mut opt = Adam::new(net.param_count(), cfg.learning_rate);
    let mut act_rng = seeding::stream(cfg.seed, "ppo-actions");
    let mut shuffle_rng = seeding::stream(cfg.seed, "ppo-shuffle");
    let mut buf = RolloutBuffer::default();
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(100);
    let mut log = UpdateLog::default();
    let mut obs = env.reset()?;
    let mut ep_return = 0.0;
    let mut num_options = 0;
    for u in 1..=cfg.updates() {
        buf.clear();
        log.option_counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..cfg.rollout_steps {
            let (logits, value) = net.forward(&obs)?;
            let (action, logp) = sample_action(&logits, &mut act_rng);
            let step = env.step(action)?;
            buf.obs.push(std::mem::take(&mut obs));
            buf.actions.push(action);
            buf.log_probs.push(logp);
            buf.values.push(value);
            buf.rewards.push(step.reward);
            buf.dones.push(step.done);
            log.timesteps += 1;
            log.rollout_steps_cumulative += step.rollout_steps;
            if let Some(i) = step.option {
                log.option_invocations += 1;
                num_options = num_options.max(i);
                if log.option_counts.len() < num_options {
                    log.option_counts.resize(num_options, 0);
                }
                log.option_counts[i - 1] += 1;
            }
            log.lazy_positives += u64::from(step.lazy_positive);
            ep_return += step.reward;
            if step.done {
                if recent.len() == 100 {
                    recent.pop_front();
                }
                recent.push_back(ep_return);
                ep_return = 0.0;
                log.episodes += 1;
                obs = env.reset()?;
            } else {
                obs = step.obs;
            }
        }
        let last_value = if buf.dones.last() == Some(&true) {
            0.0
        } else {
            net.forward(&obs)?.1
        };
        log.loss = update(
            &mut net,
            &mut opt,
            &buf,
            last_value,
            cfg,
            &mut shuffle_rng,
            u,
        )?;
        log.update = u;
        log.mean_reward = if recent.is_empty() {
            0.0
        } else {
            recent.iter().sum::<f64>() / recent.len() as f64
        };
        env.on_policy_update(u)?;
        on_update(&net, &log)?;
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One state, three actions; only action 2 pays.
    struct Bandit;

    impl Environment for Bandit {
        fn observation_dim(&self) -> usize {
            1
        }
        fn num_actions(&self) -> usize {
            3
        }
        fn reset(&mut self) -> Result<Vec<f64>> {
            Ok(vec![1.0])
        }
        fn step(&mut self, action: usize) -> Result<EnvStep> {
            Ok(EnvStep {
                obs: vec![1.0],
                reward: f64::from(u8::from(action == 2)),
                done: true,
                ..Default::default()
            })
        }
    }

    #[test]
    fn bandit_converges() {
        let cfg = PpoConfig {
            total_timesteps: 5_000,
            ..Default::default()
        };
        let net = train(&mut Bandit, &cfg, |_, _| Ok(())).unwrap();
        let p = softmax(&net.forward(&[1.0]).unwrap().0);
        assert!(p[2] > 0.99, "{p:?}");
    }

    #[test]
    fn training_is_reproducible() {
        let cfg = PpoConfig {
            total_timesteps: 600,
            hidden: vec![4],
            ..Default::default()
        };
        let a = train(&mut Bandit, &cfg, |_, _| Ok(())).unwrap();
        let b = train(&mut Bandit, &cfg, |_, _| Ok(())).unwrap();
        assert_eq!(a, b);
    }
}
