//! Generalized advantage estimation.

/// Returns `(advantages, returns)` for one rollout. `dones[t]` marks that
/// the transition at `t` ended its episode (bootstrap value 0);
/// `last_value` bootstraps the step after the buffer.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(
        values.len() == n && dones.len() == n,
        "rollout columns must have equal length"
    );
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_td_error() {
        let r = [0.0, 1.0, 0.0];
        let v = [0.5, 0.2, 0.3];
        let d = [false, true, false];
        let (a, _) = gae(&r, &v, &d, 0.7, 0.9, 0.0);
        assert_eq!(a[0], 0.0 + 0.9 * 0.2 - 0.5);
        assert_eq!(a[1], 1.0 - 0.2);
        assert_eq!(a[2], 0.0 + 0.9 * 0.7 - 0.3);
    }
}
