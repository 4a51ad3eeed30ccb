//! Proximal policy optimization with motion imitation: vectorized rollout
//! collection, generalized advantage estimation, clipped surrogate updates
//! with an adaptive learning rate, and checkpointing.

pub mod checkpoint;
pub mod env;
pub mod gae;
pub mod net;
pub mod obs;
pub mod policy;
pub mod train;
pub mod update;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use env::{EnvConfig, EnvStep, JumpEnv, Termination};
pub use gae::{gae, GaeError};
pub use net::Mlp;
pub use obs::{action_to_targets, build_observation, NoiseConfig, OBS_DIM};
pub use policy::ActorCritic;
pub use train::{train, IterationStats, TrainError, TrainOutput, Trainer};
pub use update::{ppo_update, UpdateError, UpdateStats};

use serde::{Deserialize, Serialize};

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub num_envs: usize,
    pub steps_per_env: usize,
    pub iterations: usize,
    pub num_epochs: usize,
    pub mini_batches: usize,
    pub clip_range: f64,
    pub value_loss_coeff: f64,
    pub entropy_coeff: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub max_grad_norm: f64,
    /// KL divergence target for the adaptive learning rate.
    pub kl_target: f64,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub max_lr: f64,
    pub action_scale: f64,
    pub init_std: f64,
    pub hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            num_envs: 256,
            steps_per_env: 24,
            iterations: 1500,
            num_epochs: 5,
            mini_batches: 4,
            clip_range: 0.2,
            value_loss_coeff: 1.0,
            entropy_coeff: 0.01,
            discount: 0.99,
            gae_lambda: 0.95,
            max_grad_norm: 1.0,
            kl_target: 0.01,
            initial_lr: 1e-3,
            min_lr: 1e-5,
            max_lr: 1e-2,
            action_scale: 0.5,
            init_std: 1.0,
            hidden: vec![512, 256, 128],
        }
    }
}
