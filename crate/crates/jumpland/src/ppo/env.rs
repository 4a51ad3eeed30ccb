//! Single-environment episode logic used by the vectorized trainer and the
//! evaluation harness: spawning, observation building, reward computation
//! and termination.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::obs::{action_to_targets, build_observation, NoiseConfig, OBS_DIM};
use crate::morphology::{RobotMorphology, NUM_JOINTS, NUM_LEGS};
use crate::reference::{Phase, ReferenceMotion, ReferenceSample};
use crate::rewards::{compute_reward, RewardBreakdown, RewardConfig};
use crate::sim::{step, FootContact, PdParams, SimParams, SimState, Terrain};

/// Environment behavior switches shared by all envs of a run.
#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub action_scale: f64,
    pub pd: PdParams,
    pub sim: SimParams,
    /// Observation noise, enabled during training only.
    pub noise: Option<NoiseConfig>,
    /// Per-episode friction sampled uniformly from this range.
    pub friction_range: (f64, f64),
    /// Uniform spawn jitter on the platform, m.
    pub spawn_jitter: f64,
    /// Place spawns so the nominal landing zone lies in the obstacle field
    /// beyond the platform edge.
    pub rough_landing: bool,
    /// Commanded CoM displacement of the tracked jump (for spawn placement).
    pub displacement: Vector3<f64>,
    /// Platform half side length of the terrain, m.
    pub platform_half: f64,
}

impl EnvConfig {
    pub fn new(displacement: Vector3<f64>) -> Self {
        Self {
            action_scale: 0.5,
            pd: PdParams::default(),
            sim: SimParams::default(),
            noise: None,
            friction_range: (0.4, 1.0),
            spawn_jitter: 0.5,
            rough_landing: false,
            displacement,
            platform_half: 2.5,
        }
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Running,
    BaseCollision,
    Divergence,
    Timeout,
}

/// One policy-rate step result.
#[derive(Debug, Clone)]
pub struct EnvStep {
    pub obs: [f64; OBS_DIM],
    pub reward: RewardBreakdown,
    pub done: bool,
    pub termination: Termination,
    pub phase: Phase,
    /// Torques applied on the last physics tick of this policy step.
    pub torques: [f64; NUM_JOINTS],
}

/// One environment instance tracking a shared reference motion.
pub struct JumpEnv<'a> {
    motion: &'a ReferenceMotion,
    morph: &'a RobotMorphology,
    terrain: &'a Terrain,
    reward_cfg: &'a RewardConfig,
    cfg: &'a EnvConfig,
    pub state: SimState,
    contacts: [FootContact; NUM_LEGS],
    spawn: Vector3<f64>,
    mu: f64,
    pub step_idx: usize,
    prev_action: [f64; NUM_JOINTS],
    prev_prev_action: [f64; NUM_JOINTS],
    rng: ChaCha8Rng,
}

impl<'a> JumpEnv<'a> {
    pub fn new(
        motion: &'a ReferenceMotion,
        morph: &'a RobotMorphology,
        terrain: &'a Terrain,
        reward_cfg: &'a RewardConfig,
        cfg: &'a EnvConfig,
        rng: ChaCha8Rng,
    ) -> Self {
        let state = SimState::homing(morph, terrain, 0.0, 0.0);
        let mut env = Self {
            motion,
            morph,
            terrain,
            reward_cfg,
            cfg,
            state,
            contacts: [FootContact::default(); NUM_LEGS],
            spawn: Vector3::zeros(),
            mu: 0.6,
            step_idx: 0,
            prev_action: [0.0; NUM_JOINTS],
            prev_prev_action: [0.0; NUM_JOINTS],
            rng,
        };
        env.reset();
        env
    }

    /// Start a new episode: re-randomize spawn and friction.
    pub fn reset(&mut self) -> [f64; OBS_DIM] {
        let j = self.cfg.spawn_jitter;
        let (mut x, mut y) = (0.0, 0.0);
        if j > 0.0 {
            x = self.rng.gen_range(-j..j);
            y = self.rng.gen_range(-j..j);
        }
        if self.cfg.rough_landing {
            // Spawn so the commanded landing point sits just beyond the
            // platform edge, inside the obstacle field.
            let d = self.cfg.displacement;
            let dir = if d.xy().norm() > 1e-9 {
                d.xy().normalize()
            } else {
                nalgebra::Vector2::new(1.0, 0.0)
            };
            let margin = self.rng.gen_range(0.1..0.5);
            let land = dir * (self.cfg.platform_half + margin);
            x = land.x - d.x;
            y = land.y - d.y + y;
        }
        let (lo, hi) = self.cfg.friction_range;
        self.mu = self.rng.gen_range(lo..=hi);
        self.spawn = Vector3::new(x, y, self.terrain.height(x, y));
        self.state = SimState::homing(self.morph, self.terrain, x, y);
        self.contacts = [FootContact::default(); NUM_LEGS];
        self.step_idx = 0;
        self.prev_action = [0.0; NUM_JOINTS];
        self.prev_prev_action = [0.0; NUM_JOINTS];
        self.observation(&self.reference_sample().joint_positions.clone())
    }

    fn reference_sample(&self) -> &ReferenceSample {
        let i = self.step_idx.min(self.motion.len() - 1);
        &self.motion.samples[i]
    }

    /// Reference sample translated into this episode's world frame.
    fn world_reference(&self) -> ReferenceSample {
        let s = self.reference_sample().clone();
        ReferenceSample {
            base_position: s.base_position + Vector3::new(self.spawn.x, self.spawn.y, self.spawn.z),
            ..s
        }
    }

    fn observation(&mut self, desired: &[f64; NUM_JOINTS]) -> [f64; OBS_DIM] {
        let trigger = self.step_idx >= self.motion.trigger_step;
        let noise_cfg = self.cfg.noise;
        match &noise_cfg {
            Some(n) => build_observation(
                &self.state,
                desired,
                &self.prev_action,
                trigger,
                Some((n, &mut self.rng)),
            ),
            None => build_observation(&self.state, desired, &self.prev_action, trigger, None),
        }
    }

    pub fn phase(&self) -> Phase {
        self.reference_sample().phase
    }

    pub fn friction(&self) -> f64 {
        self.mu
    }

    pub fn spawn(&self) -> Vector3<f64> {
        self.spawn
    }

    /// Advance one policy step (holding the action across the decimation),
    /// compute the reward and check termination. The returned observation is
    /// for the *next* policy step.
    pub fn step_policy(&mut self, action: &[f64; NUM_JOINTS]) -> EnvStep {
        let targets = action_to_targets(action, self.cfg.action_scale, self.morph);
        let mut collision = false;
        let mut torques = [0.0; NUM_JOINTS];
        let mut diverged = false;
        for _ in 0..self.cfg.sim.decimation {
            match step(
                &mut self.state,
                &targets,
                &self.cfg.pd,
                self.terrain,
                self.mu,
                self.morph,
                &self.cfg.sim,
                &mut self.contacts,
            ) {
                Ok(out) => {
                    collision |= out.base_collision;
                    torques = out.torques;
                }
                Err(_) => {
                    diverged = true;
                    break;
                }
            }
        }

        let phase = self.phase();
        let reference = self.world_reference();
        let reward = compute_reward(
            &self.state,
            &reference,
            action,
            &self.prev_action,
            &self.prev_prev_action,
            &torques,
            phase,
            collision,
            self.reward_cfg,
        );

        self.prev_prev_action = self.prev_action;
        self.prev_action = *action;
        self.step_idx += 1;

        let termination = if diverged {
            Termination::Divergence
        } else if collision {
            Termination::BaseCollision
        } else if self.step_idx >= self.motion.len() {
            Termination::Timeout
        } else {
            Termination::Running
        };
        let done = termination != Termination::Running;
        let desired = self.reference_sample().joint_positions;
        let obs = self.observation(&desired);
        EnvStep { obs, reward, done, termination, phase, torques }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::{reshape_flight_joints, solve_jump, JumpCommand, ToConfig};
    use crate::reference::resample;
    use rand::SeedableRng;

    fn make_motion(morph: &RobotMorphology) -> ReferenceMotion {
        let cfg = ToConfig { n_s: 10, n_f: 10, ..ToConfig::default() };
        let cmd = JumpCommand::displacement(0.3, 0.0, 0.0);
        let knots = solve_jump(&cmd, morph, &cfg).expect("plan");
        let flight = reshape_flight_joints(&knots, &cmd, morph, 4).expect("reshape");
        resample(&knots, &flight, morph, 0.02, 0.5, 1.5)
    }

    #[test]
    fn episode_runs_to_timeout_with_zero_actions() {
        let morph = RobotMorphology::default();
        let motion = make_motion(&morph);
        let terrain = Terrain::flat(0.8);
        let reward_cfg = RewardConfig::default();
        let mut cfg = EnvConfig::new(Vector3::new(0.3, 0.0, 0.0));
        cfg.pd = PdParams { kp: 1000.0, kd: 8.0 };
        cfg.spawn_jitter = 0.0;
        let rng = ChaCha8Rng::seed_from_u64(0);
        let mut env = JumpEnv::new(&motion, &morph, &terrain, &reward_cfg, &cfg, rng);
        let mut steps = 0;
        let zero = [0.0; NUM_JOINTS];
        loop {
            let s = env.step_policy(&zero);
            steps += 1;
            assert!(s.reward.total.is_finite());
            if s.done {
                assert_eq!(s.termination, Termination::Timeout);
                break;
            }
            assert!(steps <= motion.len());
        }
        assert_eq!(steps, motion.len());
    }

    #[test]
    fn reset_randomizes_friction_and_spawn() {
        let morph = RobotMorphology::default();
        let motion = make_motion(&morph);
        let terrain = Terrain::flat(0.8);
        let reward_cfg = RewardConfig::default();
        let cfg = EnvConfig::new(Vector3::new(0.3, 0.0, 0.0));
        let rng = ChaCha8Rng::seed_from_u64(1);
        let mut env = JumpEnv::new(&motion, &morph, &terrain, &reward_cfg, &cfg, rng);
        let f1 = env.friction();
        let s1 = env.spawn();
        env.reset();
        let f2 = env.friction();
        let s2 = env.spawn();
        assert_ne!(f1, f2);
        assert_ne!(s1, s2);
        assert!((0.4..=1.0).contains(&f1) && (0.4..=1.0).contains(&f2));
    }
}
