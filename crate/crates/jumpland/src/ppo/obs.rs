//! Observation and action interfaces between the simulator and the policy.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::morphology::{RobotMorphology, NUM_JOINTS};
use crate::sim::SimState;

/// base angular velocity (3) + projected gravity (3) + joint positions (12)
/// + joint velocities (12) + previous action (12) + desired joint positions
/// (12) + trigger (1).
pub const OBS_DIM: usize = 55;

/// Uniform observation-noise scales applied to the proprioceptive channels
/// during training.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub ang_vel: f64,
    pub gravity: f64,
    pub joint_pos: f64,
    pub joint_vel: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { ang_vel: 0.2, gravity: 0.05, joint_pos: 0.01, joint_vel: 1.5 }
    }
}

/// Assemble the 55-entry observation. Noise, when provided, perturbs only
/// the proprioceptive channels (angular velocity, gravity, joint state).
pub fn build_observation(
    state: &SimState,
    desired_joints: &[f64; NUM_JOINTS],
    prev_action: &[f64; NUM_JOINTS],
    trigger: bool,
    noise: Option<(&NoiseConfig, &mut ChaCha8Rng)>,
) -> [f64; OBS_DIM] {
    let mut obs = [0.0; OBS_DIM];
    let g = state.base_orientation.inverse() * Vector3::new(0.0, 0.0, -1.0);
    obs[0..3].copy_from_slice(state.base_ang_vel.as_slice());
    obs[3..6].copy_from_slice(g.as_slice());
    obs[6..18].copy_from_slice(&state.joint_positions);
    obs[18..30].copy_from_slice(&state.joint_velocities);
    obs[30..42].copy_from_slice(prev_action);
    obs[42..54].copy_from_slice(desired_joints);
    obs[54] = if trigger { 1.0 } else { 0.0 };

    if let Some((cfg, rng)) = noise {
        for i in 0..3 {
            obs[i] += rng.gen_range(-cfg.ang_vel..=cfg.ang_vel);
        }
        for i in 3..6 {
            obs[i] += rng.gen_range(-cfg.gravity..=cfg.gravity);
        }
        for i in 6..18 {
            obs[i] += rng.gen_range(-cfg.joint_pos..=cfg.joint_pos);
        }
        for i in 18..30 {
            obs[i] += rng.gen_range(-cfg.joint_vel..=cfg.joint_vel);
        }
    }
    obs
}

/// Map a policy action to PD joint targets about the homing pose, clamped to
/// the joint limits.
pub fn action_to_targets(
    action: &[f64; NUM_JOINTS],
    scale: f64,
    morph: &RobotMorphology,
) -> [f64; NUM_JOINTS] {
    let homing = morph.homing_joint_vector();
    let mut targets = [0.0; NUM_JOINTS];
    for j in 0..NUM_JOINTS {
        let [lo, hi] = morph.joint_limits[j % 3];
        targets[j] = (homing[j] + scale * action[j]).clamp(lo, hi);
    }
    targets
}
