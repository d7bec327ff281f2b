//! PPO on a two-state contextual bandit; the greedy policy should pick the
//! rewarded arm in both contexts.

use rechain::ppo::{self, argmax, EnvStep, Environment, PpoConfig};

struct Bandit {
    context: usize,
    t: u64,
}

impl Environment for Bandit {
    fn observation_dim(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn reset(&mut self) -> rechain::Result<Vec<f64>> {
        self.t += 1;
        self.context = (self.t % 2) as usize;
        let mut obs = vec![0.0; 2];
        obs[self.context] = 1.0;
        Ok(obs)
    }

    fn step(&mut self, action: usize) -> rechain::Result<EnvStep> {
        Ok(EnvStep {
            reward: if action == self.context { 1.0 } else { 0.0 },
            done: true,
            ..EnvStep::default()
        })
    }
}

fn main() -> rechain::Result<()> {
    let cfg = PpoConfig {
        total_timesteps: 6000,
        rollout_steps: 64,
        minibatch_size: 32,
        learning_rate: 3e-3,
        hidden: vec![16],
        ..PpoConfig::default()
    };
    let mut env = Bandit { context: 0, t: 0 };
    let net = ppo::train(&mut env, &cfg, |_, log| {
        if log.update % 20 == 0 {
            println!(
                "update {:>3}  mean reward {:.3}",
                log.update, log.mean_reward
            );
        }
        Ok(())
    })?;
    for c in 0..2 {
        let mut obs = vec![0.0; 2];
        obs[c] = 1.0;
        let (logits, value) = net.forward(&obs)?;
        println!(
            "context {c}: greedy arm {} value {value:.3}",
            argmax(&logits)
        );
    }
    Ok(())
}
