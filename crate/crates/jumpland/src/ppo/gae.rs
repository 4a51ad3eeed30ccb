//! Generalized advantage estimation over a fixed-length rollout segment with
//! episode-boundary masking.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GaeError {
    #[error("sequence lengths differ: rewards {rewards}, values {values}, dones {dones}")]
    LengthMismatch { rewards: usize, values: usize, dones: usize },
}

/// Compute advantages and returns for one trajectory segment.
///
/// `dones[t]` marks that the episode terminated at step `t`, so no value
/// bootstraps across it. `bootstrap_value` is V(s_T) for the state after the
/// last step.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap_value: f64,
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), GaeError> {
    if rewards.len() != values.len() || rewards.len() != dones.len() {
        return Err(GaeError::LengthMismatch {
            rewards: rewards.len(),
            values: values.len(),
            dones: dones.len(),
        });
    }
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut gae_acc = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        gae_acc = delta + gamma * lambda * not_done * gae_acc;
        advantages[t] = gae_acc;
    }
    let returns: Vec<f64> = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}
