//! Generalized advantage estimation. Applied separately to the reward and
//! cost streams.

/// `last_value` bootstraps the state reached after the final step; it is
/// ignored when that step ended an episode.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    discount: f64,
    gae_lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(
        values.len() == n && dones.len() == n,
        "GAE inputs must be aligned"
    );
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for i in (0..n).rev() {
        let next_value = if i + 1 == n {
            last_value
        } else {
            values[i + 1]
        };
        let live = if dones[i] { 0.0 } else { 1.0 };
        let delta = rewards[i] + discount * next_value * live - values[i];
        running = delta + discount * gae_lambda * live * running;
        adv[i] = running;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, targets)
}
