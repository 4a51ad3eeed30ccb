//! Run configuration: one nested human-readable file covering the planner,
//! terrain, rewards, training and simulation. Every key has a default and
//! unknown keys are rejected to catch typos.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::jump::ToConfig;
use crate::morphology::RobotMorphology;
use crate::ppo::{NoiseConfig, PpoConfig};
use crate::rewards::RewardConfig;
use crate::sim::{PdParams, SimParams, TerrainParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Full run configuration, mirrored by the config file sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub morphology: RobotMorphology,
    pub to: ToConfig,
    pub terrain: TerrainParams,
    pub reward: RewardConfig,
    pub ppo: PpoConfig,
    pub sim: SimParams,
    pub pd: PdParams,
    pub noise: NoiseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            morphology: RobotMorphology::default(),
            to: ToConfig::default(),
            terrain: TerrainParams::default(),
            reward: RewardConfig::default(),
            ppo: PpoConfig::default(),
            sim: SimParams::default(),
            pd: PdParams::default(),
            noise: NoiseConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(toml::from_str(&text)?)
    }

    /// Stable hex hash of the full configuration, embedded in every output.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config is serializable");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(16);
        for b in &digest[..8] {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.ppo.num_envs, 256);
        assert_eq!(cfg.terrain.num_obstacles, 1500);
        assert_eq!(cfg.reward.w_base_pos, 5.0);
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let cfg: RunConfig = toml::from_str(
            "seed = 7\n[reward]\nsigma_joint_landing = 1.5\n[ppo]\nnum_envs = 8\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.reward.sigma_joint_landing, 1.5);
        assert_eq!(cfg.reward.sigma_joint_sf, 0.2);
        assert_eq!(cfg.ppo.num_envs, 8);
        assert_eq!(cfg.ppo.steps_per_env, 24);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 1\n").is_err());
        assert!(toml::from_str::<RunConfig>("[reward]\nw_base_poss = 1.0\n").is_err());
        assert!(toml::from_str::<RunConfig>("[nope]\nx = 1\n").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash(), a.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
