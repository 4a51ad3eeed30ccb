//! Motion-imitation reward: tracking terms with Gaussian-kernel bandwidths,
//! action/energy regularization, and the landing-phase relaxation that
//! widens the joint-tracking bandwidth after the nominal touch-down.

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::morphology::NUM_JOINTS;
use crate::reference::{Phase, ReferenceSample};
use crate::sim::SimState;

/// Reward weights and tracking bandwidths.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub w_base_pos: f64,
    pub w_base_rot: f64,
    pub w_joint: f64,
    pub w_action_rate: f64,
    pub w_smooth: f64,
    pub w_power: f64,
    pub w_torque: f64,
    pub w_base_collision: f64,
    pub sigma_base_pos: f64,
    pub sigma_base_rot: f64,
    /// Joint tracking bandwidth during stance and flight, rad.
    pub sigma_joint_sf: f64,
    /// Joint tracking bandwidth during landing, rad.
    pub sigma_joint_landing: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            w_base_pos: 5.0,
            w_base_rot: 2.0,
            w_joint: 2.0,
            w_action_rate: -0.01,
            w_smooth: -0.02,
            w_power: -2e-5,
            w_torque: -1e-5,
            w_base_collision: -10.0,
            sigma_base_pos: 0.02,
            sigma_base_rot: 0.01,
            sigma_joint_sf: 0.2,
            sigma_joint_landing: 2.0,
        }
    }
}

impl RewardConfig {
    /// Bandwidth for joint tracking in the given phase. The relaxation only
    /// applies after the nominal touch-down.
    pub fn sigma_joint(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Landing => self.sigma_joint_landing,
            _ => self.sigma_joint_sf,
        }
    }

    /// Disable the landing relaxation: landing uses the stance/flight
    /// bandwidth (the ablation variant).
    pub fn without_relaxation(mut self) -> Self {
        self.sigma_joint_landing = self.sigma_joint_sf;
        self
    }
}

/// Per-term reward values; `total` is their sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct RewardBreakdown {
    pub base_pos: f64,
    pub base_rot: f64,
    pub joint: f64,
    pub action_rate: f64,
    pub smooth: f64,
    pub energy: f64,
    pub torque: f64,
    pub base_collision: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub const TERM_NAMES: [&'static str; 8] = [
        "base_pos",
        "base_rot",
        "joint",
        "action_rate",
        "smooth",
        "energy",
        "torque",
        "base_collision",
    ];

    pub fn terms(&self) -> [f64; 8] {
        [
            self.base_pos,
            self.base_rot,
            self.joint,
            self.action_rate,
            self.smooth,
            self.energy,
            self.torque,
            self.base_collision,
        ]
    }
}

/// Gaussian tracking kernel for vector errors: exp(-||e / sigma||^2).
pub fn tracking_term(x: &[f64], x_star: &[f64], sigma: f64) -> f64 {
    debug_assert_eq!(x.len(), x_star.len());
    debug_assert!(sigma > 0.0);
    let s: f64 = x
        .iter()
        .zip(x_star)
        .map(|(a, b)| {
            let e = (b - a) / sigma;
            e * e
        })
        .sum();
    (-s).exp()
}

/// Gaussian tracking kernel for orientations: the error is the geodesic
/// rotation angle of q_star * q^-1, divided by sigma.
pub fn tracking_term_quat(
    q: &UnitQuaternion<f64>,
    q_star: &UnitQuaternion<f64>,
    sigma: f64,
) -> f64 {
    let angle = (q_star * q.inverse()).angle() / sigma;
    (-angle * angle).exp()
}

/// Factor by which the small-error joint-tracking gradient shrinks when the
/// bandwidth switches from `sigma_sf` to `sigma_landing`.
pub fn joint_tracking_gradient_scale(sigma_sf: f64, sigma_landing: f64) -> f64 {
    debug_assert!(sigma_sf > 0.0 && sigma_landing > 0.0);
    (sigma_landing / sigma_sf).powi(2)
}

/// Compute the full reward for one policy step.
///
/// `reference.base_position` must already be expressed in the episode's
/// world frame (translated to the spawn point by the caller).
#[allow(clippy::too_many_arguments)]
pub fn compute_reward(
    state: &SimState,
    reference: &ReferenceSample,
    action: &[f64; NUM_JOINTS],
    prev_action: &[f64; NUM_JOINTS],
    prev_prev_action: &[f64; NUM_JOINTS],
    torques: &[f64; NUM_JOINTS],
    phase: Phase,
    collision: bool,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let mut b = RewardBreakdown::default();

    b.base_pos = cfg.w_base_pos
        * tracking_term(
            state.base_position.as_slice(),
            reference.base_position.as_slice(),
            cfg.sigma_base_pos,
        );
    b.base_rot = cfg.w_base_rot
        * tracking_term_quat(
            &state.base_orientation,
            &reference.base_orientation,
            cfg.sigma_base_rot,
        );
    b.joint = cfg.w_joint
        * tracking_term(
            &state.joint_positions,
            &reference.joint_positions,
            cfg.sigma_joint(phase),
        );

    let mut rate = 0.0;
    let mut smooth = 0.0;
    for j in 0..NUM_JOINTS {
        let d = action[j] - prev_action[j];
        rate += d * d;
        let dd = action[j] - 2.0 * prev_action[j] + prev_prev_action[j];
        smooth += dd * dd;
    }
    b.action_rate = cfg.w_action_rate * rate;
    b.smooth = cfg.w_smooth * smooth;

    let mut power = 0.0;
    let mut torque_sq = 0.0;
    for j in 0..NUM_JOINTS {
        power += (torques[j] * state.joint_velocities[j]).abs();
        torque_sq += torques[j] * torques[j];
    }
    b.energy = cfg.w_power * power;
    b.torque = cfg.w_torque * torque_sq;
    b.base_collision = if collision { cfg.w_base_collision } else { 0.0 };

    b.total = b.base_pos
        + b.base_rot
        + b.joint
        + b.action_rate
        + b.smooth
        + b.energy
        + b.torque
        + b.base_collision;
    b
}
