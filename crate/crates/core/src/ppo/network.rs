//! Actor-critic MLPs with hand-written backpropagation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected tanh network with a linear output layer. Parameters are
/// stored flat, layer by layer: weights (row-major, `out x in`) then biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Scaled-normal initialization with zero biases; the output layer is
    /// scaled by `out_gain`.
    pub fn new(sizes: &[usize], out_gain: f64, rng: &mut impl Rng) -> Self {
        let mut params = Vec::with_capacity(Self::param_count(sizes));
        let last = sizes.len() - 2;
        for (l, w) in sizes.windows(2).enumerate() {
            let gain = if l == last { out_gain } else { 1.0 };
            let scale = gain / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                let z: f64 = StandardNormal.sample(rng);
                params.push(z * scale);
            }
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; Self::param_count(sizes)],
        }
    }

    /// Forward pass. `acts` receives the input and every hidden activation,
    /// which [`Mlp::backward`] needs.
    pub fn forward(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) -> Vec<f64> {
        acts.clear();
        acts.push(x.to_vec());
        let mut off = 0;
        let n_layers = self.sizes.len() - 1;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let input = acts.last().expect("input pushed");
            let mut out: Vec<f64> = (0..n_out)
                .map(|o| {
                    b[o] + w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(input)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                })
                .collect();
            if l + 1 < n_layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
                acts.push(out);
            } else {
                return out;
            }
        }
        unreachable!("network has at least one layer")
    }

    /// Accumulates into `grad` the gradient of a scalar loss whose
    /// derivative with respect to the output is `dout`.
    pub fn backward(&self, acts: &[Vec<f64>], dout: &[f64], grad: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = dout.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let o = offsets[l];
            let input = &acts[l];
            for (j, &d) in delta.iter().enumerate() {
                let row = &mut grad[o + j * n_in..o + (j + 1) * n_in];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[o + n_in * n_out + j] += d;
            }
            if l > 0 {
                let w = &self.params[o..o + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (j, &d) in delta.iter().enumerate() {
                    for (p, &wv) in prev.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                        *p += wv * d;
                    }
                }
                for (p, &a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }
}

/// Policy (logits) and value towers reading the same observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNetwork {
    pub obs_dim: usize,
    pub num_actions: usize,
    pub hidden: Vec<usize>,
    pub actor: Mlp,
    pub critic: Mlp,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub actor: Vec<Vec<f64>>,
    pub critic: Vec<Vec<f64>>,
}

impl PolicyNetwork {
    pub fn new(obs_dim: usize, num_actions: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut a = vec![obs_dim];
        a.extend_from_slice(hidden);
        let mut c = a.clone();
        a.push(num_actions);
        c.push(1);
        Self {
            obs_dim,
            num_actions,
            hidden: hidden.to_vec(),
            actor: Mlp::new(&a, 0.01, rng),
            critic: Mlp::new(&c, 1.0, rng),
        }
    }

    pub fn param_count(&self) -> usize {
        self.actor.params.len() + self.critic.params.len()
    }

    /// Flat copy of all parameters: actor first, then critic.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.actor.params.clone();
        p.extend_from_slice(&self.critic.params);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let n = self.actor.params.len();
        self.actor.params.copy_from_slice(&p[..n]);
        self.critic.params.copy_from_slice(&p[n..]);
    }

    pub fn forward_cached(&self, obs: &[f64], cache: &mut ForwardCache) -> Result<(Vec<f64>, f64)> {
        if obs.len() != self.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        let logits = self.actor.forward(obs, &mut cache.actor);
        let value = self.critic.forward(obs, &mut cache.critic)[0];
        Ok((logits, value))
    }

    pub fn forward(&self, obs: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.forward_cached(obs, &mut ForwardCache::default())
    }

    /// Accumulates the gradient for output derivatives `dlogits`, `dvalue`
    /// into the flat `grad` (actor block, then critic block).
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64], dvalue: f64, grad: &mut [f64]) {
        let n = self.actor.params.len();
        let (ga, gc) = grad.split_at_mut(n);
        self.actor.backward(&cache.actor, dlogits, ga);
        self.critic.backward(&cache.critic, &[dvalue], gc);
    }

    /// Writes a JSON checkpoint.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let net: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        let sizes = |out: usize| {
            let mut v = vec![net.obs_dim];
            v.extend_from_slice(&net.hidden);
            v.push(out);
            v
        };
        if net.actor.sizes != sizes(net.num_actions)
            || net.critic.sizes != sizes(1)
            || net.actor.params.len() != Mlp::param_count(&net.actor.sizes)
            || net.critic.params.len() != Mlp::param_count(&net.critic.sizes)
        {
            return Err(Error::Config(format!(
                "checkpoint {} has inconsistent layer sizes",
                path.display()
            )));
        }
        Ok(net)
    }

    pub fn is_finite(&self) -> bool {
        self.actor
            .params
            .iter()
            .chain(&self.critic.params)
            .all(|p| p.is_finite())
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_is_uniform() {
        let net = PolicyNetwork {
            obs_dim: 3,
            num_actions: 4,
            hidden: vec![5],
            actor: Mlp::zeros(&[3, 5, 4]),
            critic: Mlp::zeros(&[3, 5, 1]),
        };
        let (logits, v) = net.forward(&[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(v, 0.0);
        for p in softmax(&logits) {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_computed_tiny_net() {
        // 2-2-2: W1 = [[1, 2], [0, -1]], b1 = [0, 0.5]; W2 = [[1, 1], [2, 0]], b2 = [0.1, 0].
        let mlp = Mlp {
            sizes: vec![2, 2, 2],
            params: vec![1.0, 2.0, 0.0, -1.0, 0.0, 0.5, 1.0, 1.0, 2.0, 0.0, 0.1, 0.0],
        };
        let out = mlp.forward(&[0.5, 0.25], &mut Vec::new());
        let h = [(0.5f64 + 0.5).tanh(), (-0.25f64 + 0.5).tanh()];
        assert!((out[0] - (h[0] + h[1] + 0.1)).abs() < 1e-15);
        assert!((out[1] - 2.0 * h[0]).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = PolicyNetwork::new(3, 2, &[4], &mut crate::seeding::stream(0, "t"));
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 1
            })
        ));
    }

    #[test]
    fn softmax_normalizes() {
        let p = softmax(&[1000.0, -3.0, 2.5, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
