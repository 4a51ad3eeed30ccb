//! Vectorized on-policy training loop: collect fixed-length rollout segments
//! from a bank of environments, estimate advantages, and run the clipped
//! surrogate update.

use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::env::{EnvConfig, JumpEnv, Termination};
use super::gae::gae;
use super::obs::OBS_DIM;
use super::policy::ActorCritic;
use super::update::{ppo_update, Batch, UpdateError};
use super::PpoConfig;
use crate::morphology::{RobotMorphology, NUM_JOINTS};
use crate::reference::ReferenceMotion;
use crate::rewards::{RewardBreakdown, RewardConfig};
use crate::sim::Terrain;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Update(#[from] UpdateError),
}

/// Per-iteration training diagnostics, one row of the metrics log.
#[derive(Debug, Clone)]
pub struct IterationStats {
    pub iteration: usize,
    /// Mean per-step total reward over the collected batch.
    pub mean_reward: f64,
    /// Mean per-term rewards in `RewardBreakdown::TERM_NAMES` order.
    pub term_means: [f64; 8],
    /// Mean length of the episodes that finished this iteration.
    pub mean_episode_length: f64,
    /// Fraction of finished episodes that ran to the time limit.
    pub timeout_fraction: f64,
    pub episodes_finished: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub lr: f64,
}

/// Training run artifacts.
pub struct TrainOutput {
    pub policy: ActorCritic,
    pub stats: Vec<IterationStats>,
}

/// Holds the environment bank and optimizer state across iterations.
pub struct Trainer<'a> {
    envs: Vec<JumpEnv<'a>>,
    pub policy: ActorCritic,
    cfg: &'a PpoConfig,
    obs: Array2<f32>,
    sample_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    lr: f64,
    adam_t: u64,
    iteration: usize,
    /// Running per-episode step counts, for episode-length statistics.
    episode_steps: Vec<usize>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        motion: &'a ReferenceMotion,
        morph: &'a RobotMorphology,
        terrain: &'a Terrain,
        reward_cfg: &'a RewardConfig,
        env_cfg: &'a EnvConfig,
        cfg: &'a PpoConfig,
        seed: u64,
    ) -> Self {
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = ActorCritic::new(&cfg.hidden, cfg.init_std as f32, &mut init_rng);
        let mut envs = Vec::with_capacity(cfg.num_envs);
        let mut obs = Array2::zeros((cfg.num_envs, OBS_DIM));
        for e in 0..cfg.num_envs {
            let env_rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(e as u64 + 1),
            );
            let env = JumpEnv::new(motion, morph, terrain, reward_cfg, env_cfg, env_rng);
            envs.push(env);
        }
        for (e, env) in envs.iter_mut().enumerate() {
            let o = env.reset();
            for (k, &v) in o.iter().enumerate() {
                obs[(e, k)] = v as f32;
            }
        }
        Self {
            envs,
            policy,
            cfg,
            obs,
            sample_rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5EED)),
            shuffle_rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xD00D)),
            lr: cfg.initial_lr,
            adam_t: 0,
            iteration: 0,
            episode_steps: vec![0; cfg.num_envs],
        }
    }

    /// Collect one rollout segment and run one optimization update.
    pub fn iterate(&mut self) -> Result<IterationStats, TrainError> {
        let n_envs = self.cfg.num_envs;
        let n_steps = self.cfg.steps_per_env;
        let total = n_envs * n_steps;

        let mut all_obs = Array2::<f32>::zeros((total, OBS_DIM));
        let mut all_actions = Array2::<f32>::zeros((total, NUM_JOINTS));
        let mut all_logp = Array1::<f32>::zeros(total);
        let mut rewards = vec![vec![0.0f64; n_steps]; n_envs];
        let mut dones = vec![vec![false; n_steps]; n_envs];
        let mut values = vec![vec![0.0f64; n_steps]; n_envs];

        let mut term_sums = [0.0f64; 8];
        let mut reward_sum = 0.0f64;
        let mut episodes_finished = 0usize;
        let mut timeouts = 0usize;
        let mut episode_length_sum = 0usize;

        for t in 0..n_steps {
            let (actions, logp) = self.policy.act_sample(&self.obs, &mut self.sample_rng);
            let vals = self.policy.values(&self.obs);
            for e in 0..n_envs {
                let row = t * n_envs + e;
                all_obs.slice_mut(s![row, ..]).assign(&self.obs.slice(s![e, ..]));
                all_actions.slice_mut(s![row, ..]).assign(&actions.slice(s![e, ..]));
                all_logp[row] = logp[e];
                values[e][t] = vals[e] as f64;

                let mut act = [0.0f64; NUM_JOINTS];
                for j in 0..NUM_JOINTS {
                    act[j] = actions[(e, j)] as f64;
                }
                let step = self.envs[e].step_policy(&act);
                rewards[e][t] = step.reward.total;
                dones[e][t] = step.done;
                reward_sum += step.reward.total;
                accumulate_terms(&mut term_sums, &step.reward);
                self.episode_steps[e] += 1;

                let next = if step.done {
                    episodes_finished += 1;
                    episode_length_sum += self.episode_steps[e];
                    self.episode_steps[e] = 0;
                    if step.termination == Termination::Timeout {
                        timeouts += 1;
                    }
                    self.envs[e].reset()
                } else {
                    step.obs
                };
                for (k, &v) in next.iter().enumerate() {
                    self.obs[(e, k)] = v as f32;
                }
            }
        }

        // Bootstrap values for the state after the segment.
        let boot = self.policy.values(&self.obs);
        let mut advantages = Array1::<f32>::zeros(total);
        let mut returns = Array1::<f32>::zeros(total);
        for e in 0..n_envs {
            let (adv, ret) = gae(
                &rewards[e],
                &values[e],
                boot[e] as f64,
                &dones[e],
                self.cfg.discount,
                self.cfg.gae_lambda,
            )
            .expect("segment buffers share a length");
            for t in 0..n_steps {
                advantages[t * n_envs + e] = adv[t] as f32;
                returns[t * n_envs + e] = ret[t] as f32;
            }
        }

        let mut batch = Batch {
            obs: all_obs,
            actions: all_actions,
            old_log_probs: all_logp,
            advantages,
            returns,
        };
        let stats = ppo_update(
            &mut self.policy,
            &mut batch,
            self.cfg,
            &mut self.lr,
            &mut self.adam_t,
            &mut self.shuffle_rng,
        )?;

        self.iteration += 1;
        let samples = total as f64;
        let mut term_means = [0.0f64; 8];
        for (m, s) in term_means.iter_mut().zip(&term_sums) {
            *m = s / samples;
        }
        Ok(IterationStats {
            iteration: self.iteration,
            mean_reward: reward_sum / samples,
            term_means,
            mean_episode_length: if episodes_finished > 0 {
                episode_length_sum as f64 / episodes_finished as f64
            } else {
                0.0
            },
            timeout_fraction: if episodes_finished > 0 {
                timeouts as f64 / episodes_finished as f64
            } else {
                0.0
            },
            episodes_finished,
            policy_loss: stats.policy_loss as f64,
            value_loss: stats.value_loss as f64,
            entropy: stats.entropy as f64,
            approx_kl: stats.approx_kl as f64,
            lr: stats.lr,
        })
    }
}

fn accumulate_terms(sums: &mut [f64; 8], r: &RewardBreakdown) {
    for (s, t) in sums.iter_mut().zip(r.terms()) {
        *s += t;
    }
}

/// Run a full training session; `on_iteration` sees every stats row (for
/// logging and checkpointing).
pub fn train(
    motion: &ReferenceMotion,
    morph: &RobotMorphology,
    terrain: &Terrain,
    reward_cfg: &RewardConfig,
    env_cfg: &EnvConfig,
    cfg: &PpoConfig,
    seed: u64,
    mut on_iteration: impl FnMut(&IterationStats, &ActorCritic),
) -> Result<TrainOutput, TrainError> {
    let mut trainer = Trainer::new(motion, morph, terrain, reward_cfg, env_cfg, cfg, seed);
    let mut stats = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let row = trainer.iterate()?;
        on_iteration(&row, &trainer.policy);
        stats.push(row);
    }
    Ok(TrainOutput { policy: trainer.policy, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::{reshape_flight_joints, solve_jump, JumpCommand, ToConfig};
    use crate::reference::resample;
    use crate::sim::PdParams;
    use nalgebra::Vector3;

    fn setup() -> (ReferenceMotion, RobotMorphology) {
        let morph = RobotMorphology::default();
        let cfg = ToConfig { n_s: 10, n_f: 10, ..ToConfig::default() };
        let cmd = JumpCommand::displacement(0.3, 0.0, 0.0);
        let knots = solve_jump(&cmd, &morph, &cfg).expect("plan");
        let flight = reshape_flight_joints(&knots, &cmd, &morph, 4).expect("reshape");
        (resample(&knots, &flight, &morph, 0.02, 0.5, 1.5), morph)
    }

    fn small_ppo() -> PpoConfig {
        PpoConfig {
            num_envs: 4,
            steps_per_env: 8,
            iterations: 2,
            hidden: vec![32, 16],
            ..PpoConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let (motion, morph) = setup();
        let terrain = Terrain::flat(0.8);
        let reward_cfg = RewardConfig::default();
        let mut env_cfg = EnvConfig::new(Vector3::new(0.3, 0.0, 0.0));
        env_cfg.pd = PdParams { kp: 1000.0, kd: 8.0 };
        let cfg = small_ppo();
        let run = |seed| {
            train(&motion, &morph, &terrain, &reward_cfg, &env_cfg, &cfg, seed, |_, _| {})
                .unwrap()
        };
        let a = run(42);
        let b = run(42);
        let c = run(43);
        assert_eq!(a.policy.actor.flatten(), b.policy.actor.flatten());
        assert_eq!(a.stats[0].mean_reward, b.stats[0].mean_reward);
        assert_ne!(a.stats[0].mean_reward, c.stats[0].mean_reward);
    }

    #[test]
    fn iteration_stats_are_finite_and_complete() {
        let (motion, morph) = setup();
        let terrain = Terrain::flat(0.8);
        let reward_cfg = RewardConfig::default();
        let mut env_cfg = EnvConfig::new(Vector3::new(0.3, 0.0, 0.0));
        env_cfg.pd = PdParams { kp: 1000.0, kd: 8.0 };
        let cfg = small_ppo();
        let out =
            train(&motion, &morph, &terrain, &reward_cfg, &env_cfg, &cfg, 7, |_, _| {}).unwrap();
        assert_eq!(out.stats.len(), 2);
        for s in &out.stats {
            assert!(s.mean_reward.is_finite());
            assert!(s.term_means.iter().all(|t| t.is_finite()));
            assert!(s.lr >= cfg.min_lr && s.lr <= cfg.max_lr);
        }
        assert_eq!(out.stats[1].iteration, 2);
    }
}
