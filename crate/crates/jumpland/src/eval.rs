//! Evaluation harness: landing scenarios with plank obstacles under chosen
//! feet, episode scoring (success / weak success / fail) and report output.

use nalgebra::{Vector2, Vector3};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::morphology::{leg_fk, LegJointAngles, RobotMorphology, NUM_JOINTS, NUM_LEGS};
use crate::ppo::{ActorCritic, EnvConfig, JumpEnv, Termination, OBS_DIM};
use crate::reference::ReferenceMotion;
use crate::rewards::RewardConfig;
use crate::sim::{generate_terrain, Obstacle, SimState, Terrain, TerrainParams};

/// Difficulty levels: plank heights in meters.
pub const EVAL_HEIGHTS: [f64; 4] = [0.05, 0.10, 0.13, 0.16];

/// Plank side length, m.
pub const PLANK_SIZE: f64 = 0.5;

/// Which feet land on planks. Leg order is FL, FR, HL, HR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Both front feet.
    Front,
    /// Both hind feet.
    Hind,
    /// Both right feet.
    Right,
    /// Hind-right foot only.
    Hr,
    /// Front-left foot only.
    Fl,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::Front, Scenario::Hind, Scenario::Right, Scenario::Hr, Scenario::Fl];

    pub fn feet(&self) -> &'static [usize] {
        match self {
            Scenario::Front => &[0, 1],
            Scenario::Hind => &[2, 3],
            Scenario::Right => &[1, 3],
            Scenario::Hr => &[3],
            Scenario::Fl => &[0],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Front => "front",
            Scenario::Hind => "hind",
            Scenario::Right => "right",
            Scenario::Hr => "HR",
            Scenario::Fl => "FL",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s {
            "front" => Ok(Scenario::Front),
            "hind" => Ok(Scenario::Hind),
            "right" => Ok(Scenario::Right),
            "HR" => Ok(Scenario::Hr),
            "FL" => Ok(Scenario::Fl),
            other => Err(EvalError::UnknownScenario(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown scenario {0:?} (expected front|hind|right|HR|FL)")]
    UnknownScenario(String),
    #[error("unsupported plank height {0} (expected one of 0.05|0.10|0.13|0.16)")]
    UnknownHeight(f64),
    #[error("terrain construction failed: {0}")]
    Terrain(#[from] crate::sim::TerrainError),
}

pub fn validate_height(h: f64) -> Result<f64, EvalError> {
    EVAL_HEIGHTS
        .iter()
        .copied()
        .find(|v| (v - h).abs() < 1e-9)
        .ok_or(EvalError::UnknownHeight(h))
}

/// Episode outcome with the paper scoring: S = 1, WS = 0.8, F = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    WeakSuccess,
    Fail,
}

impl Outcome {
    pub fn score(&self) -> f64 {
        match self {
            Outcome::Success => 1.0,
            Outcome::WeakSuccess => 0.8,
            Outcome::Fail => 0.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "S",
            Outcome::WeakSuccess => "WS",
            Outcome::Fail => "F",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    /// Policy step of first post-takeoff ground contact, if any.
    pub touchdown_step: Option<usize>,
    /// Mean base-orientation tracking reward over post-touchdown steps.
    pub post_td_base_rot: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub scenario: Scenario,
    pub height: f64,
    pub episodes: Vec<EpisodeResult>,
}

impl EvalReport {
    /// Mean score over the episodes, in [0, 1].
    pub fn success_rate(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().map(|e| e.outcome.score()).sum::<f64>() / self.episodes.len() as f64
    }

    pub fn mean_post_td_base_rot(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().map(|e| e.post_td_base_rot).sum::<f64>() / self.episodes.len() as f64
    }
}

/// Nominal world landing point of each foot from the reference motion.
pub fn nominal_foot_landings(
    motion: &ReferenceMotion,
    morph: &RobotMorphology,
) -> [Vector3<f64>; NUM_LEGS] {
    let idx = motion.touchdown_step.min(motion.len() - 1);
    let sample = &motion.samples[idx];
    let mut out = [Vector3::zeros(); NUM_LEGS];
    for leg in 0..NUM_LEGS {
        let q = LegJointAngles::from_slice(&sample.joint_positions[3 * leg..3 * leg + 3]);
        out[leg] = sample.base_position + leg_fk(q, leg, morph);
    }
    out
}

/// Flat terrain with plank obstacles of `height` under the scenario feet's
/// nominal landing points.
pub fn eval_terrain(
    motion: &ReferenceMotion,
    morph: &RobotMorphology,
    scenario: Scenario,
    height: f64,
    friction: f64,
) -> Result<Terrain, EvalError> {
    let params = TerrainParams { num_obstacles: 0, friction, ..TerrainParams::default() };
    let mut terrain = generate_terrain(&params, 0)?;
    let landings = nominal_foot_landings(motion, morph);
    for &leg in scenario.feet() {
        terrain.add_obstacle(Obstacle {
            center: [landings[leg].x, landings[leg].y],
            size: [PLANK_SIZE, PLANK_SIZE],
            height,
        });
    }
    Ok(terrain)
}

/// Run one deterministic-policy episode and classify it.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    policy: &ActorCritic,
    motion: &ReferenceMotion,
    morph: &RobotMorphology,
    terrain: &Terrain,
    reward_cfg: &RewardConfig,
    env_cfg: &EnvConfig,
    scenario: Scenario,
    episode_seed: u64,
) -> EpisodeResult {
    let rng = ChaCha8Rng::seed_from_u64(episode_seed);
    let mut env = JumpEnv::new(motion, morph, terrain, reward_cfg, env_cfg, rng);
    let mut obs = env.reset();

    let steps_per_second = (1.0 / motion.dt).round() as usize;
    let saturation_limit = steps_per_second / 5; // 0.2 s
    let calm_window = 10;

    let mut touchdown: Option<usize> = None;
    let mut first_contact_xy: [Option<Vector2<f64>>; NUM_LEGS] = [None; NUM_LEGS];
    let mut saturation_run = [0usize; NUM_JOINTS];
    let mut saturated_too_long = false;
    let mut calm_run = 0usize;
    let mut first_calm_step: Option<usize> = None;
    let mut post_td_rot_sum = 0.0;
    let mut post_td_count = 0usize;
    let mut failed_hard = false;

    loop {
        let mut row = Array2::<f32>::zeros((1, OBS_DIM));
        for (k, &v) in obs.iter().enumerate() {
            row[(0, k)] = v as f32;
        }
        let mean = policy.act_mean(&row);
        let mut action = [0.0f64; NUM_JOINTS];
        for j in 0..NUM_JOINTS {
            action[j] = mean[(0, j)] as f64;
        }
        let step = env.step_policy(&action);
        let idx = env.step_idx;

        if touchdown.is_none()
            && idx > motion.takeoff_step
            && env.state.foot_contact.iter().any(|&c| c)
        {
            touchdown = Some(idx);
        }
        if idx > motion.takeoff_step {
            for leg in 0..NUM_LEGS {
                if first_contact_xy[leg].is_none() && env.state.foot_contact[leg] {
                    first_contact_xy[leg] = Some(foot_world_xy(&env.state, morph, leg));
                }
            }
        }
        for j in 0..NUM_JOINTS {
            if step.torques[j].abs() >= morph.torque_limit - 1e-9 {
                saturation_run[j] += 1;
                if saturation_run[j] > saturation_limit {
                    saturated_too_long = true;
                }
            } else {
                saturation_run[j] = 0;
            }
        }
        if let Some(td) = touchdown {
            post_td_rot_sum += step.reward.base_rot;
            post_td_count += 1;
            if env.state.base_ang_vel.norm() < 0.5 {
                calm_run += 1;
                if calm_run >= calm_window && first_calm_step.is_none() {
                    first_calm_step = Some(idx + 1 - calm_run);
                }
            } else {
                calm_run = 0;
            }
            let _ = td;
        }

        if step.done {
            if step.termination != Termination::Timeout {
                failed_hard = true;
            }
            break;
        }
        obs = step.obs;
    }

    let post_td_base_rot =
        if post_td_count > 0 { post_td_rot_sum / post_td_count as f64 } else { 0.0 };
    let outcome = classify(
        &env,
        morph,
        scenario,
        touchdown,
        first_calm_step,
        &first_contact_xy,
        failed_hard,
        saturated_too_long,
        steps_per_second,
    );
    EpisodeResult { outcome, touchdown_step: touchdown, post_td_base_rot }
}

#[allow(clippy::too_many_arguments)]
fn classify(
    env: &JumpEnv,
    morph: &RobotMorphology,
    scenario: Scenario,
    touchdown: Option<usize>,
    first_calm_step: Option<usize>,
    first_contact_xy: &[Option<Vector2<f64>>; NUM_LEGS],
    failed_hard: bool,
    saturated_too_long: bool,
    steps_per_second: usize,
) -> Outcome {
    if failed_hard || saturated_too_long {
        return Outcome::Fail;
    }
    let Some(td) = touchdown else {
        return Outcome::Fail;
    };
    // The base angular velocity must settle below 0.5 rad/s within 1 s of
    // first touch-down.
    let Some(calm) = first_calm_step else {
        return Outcome::Fail;
    };
    if calm > td + steps_per_second {
        return Outcome::Fail;
    }
    // Success needs every obstacle foot to have stayed within 5 cm of where
    // it first touched down.
    let mut within = true;
    for &leg in scenario.feet() {
        match first_contact_xy[leg] {
            Some(p0) => {
                let p = foot_world_xy(&env.state, morph, leg);
                if (p - p0).norm() > 0.05 {
                    within = false;
                }
            }
            None => within = false,
        }
    }
    if within {
        Outcome::Success
    } else {
        Outcome::WeakSuccess
    }
}

fn foot_world_xy(state: &SimState, morph: &RobotMorphology, leg: usize) -> Vector2<f64> {
    let q = LegJointAngles::from_slice(&state.joint_positions[3 * leg..3 * leg + 3]);
    let p = state.base_position + state.base_orientation * leg_fk(q, leg, morph);
    Vector2::new(p.x, p.y)
}

/// Evaluate a policy over `episodes` episodes of one scenario/height cell.
#[allow(clippy::too_many_arguments)]
pub fn run_eval(
    policy: &ActorCritic,
    motion: &ReferenceMotion,
    morph: &RobotMorphology,
    reward_cfg: &RewardConfig,
    env_cfg: &EnvConfig,
    scenario: Scenario,
    height: f64,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    let height = validate_height(height)?;
    let terrain = eval_terrain(motion, morph, scenario, height, 0.7)?;
    let mut results = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let episode_seed = seed.wrapping_mul(1_000_003).wrapping_add(e as u64);
        results.push(run_episode(
            policy,
            motion,
            morph,
            &terrain,
            reward_cfg,
            env_cfg,
            scenario,
            episode_seed,
        ));
    }
    Ok(EvalReport { scenario, height, episodes: results })
}

/// Render the report as CSV with per-episode rows.
pub fn write_eval_csv(report: &EvalReport, config_hash: &str, seed: u64) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={config_hash} seed={seed}\n"));
    out.push_str("episode,scenario,height_m,outcome,score,touchdown_step,post_td_base_rot\n");
    for (i, e) in report.episodes.iter().enumerate() {
        let td = e.touchdown_step.map(|t| t.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            i,
            report.scenario.as_str(),
            report.height,
            e.outcome.as_str(),
            e.outcome.score(),
            td,
            e.post_td_base_rot,
        ));
    }
    out.push_str(&format!(
        "# success_rate={} mean_post_td_base_rot={}\n",
        report.success_rate(),
        report.mean_post_td_base_rot()
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::{reshape_flight_joints, solve_jump, JumpCommand, ToConfig};
    use crate::reference::resample;
    use crate::sim::PdParams;

    fn make_motion(morph: &RobotMorphology) -> ReferenceMotion {
        let cfg = ToConfig { n_s: 10, n_f: 10, ..ToConfig::default() };
        let cmd = JumpCommand::displacement(0.3, 0.0, 0.0);
        let knots = solve_jump(&cmd, morph, &cfg).expect("plan");
        let flight = reshape_flight_joints(&knots, &cmd, morph, 4).expect("reshape");
        resample(&knots, &flight, morph, 0.02, 0.5, 1.5)
    }

    #[test]
    fn scenario_parsing_and_feet() {
        assert_eq!("front".parse::<Scenario>().unwrap().feet(), &[0, 1]);
        assert_eq!("HR".parse::<Scenario>().unwrap().feet(), &[3]);
        assert!("diagonal".parse::<Scenario>().is_err());
        assert!(validate_height(0.13).is_ok());
        assert!(validate_height(0.2).is_err());
        assert_eq!(Scenario::ALL.len(), 5);
    }

    #[test]
    fn planks_raise_terrain_under_selected_feet() {
        let morph = RobotMorphology::default();
        let motion = make_motion(&morph);
        let terrain = eval_terrain(&motion, &morph, Scenario::Hind, 0.13, 0.7).unwrap();
        let landings = nominal_foot_landings(&motion, &morph);
        for leg in [2usize, 3] {
            let h = terrain.height(landings[leg].x, landings[leg].y);
            assert!((h - 0.13).abs() < 1e-9, "leg {leg}: height {h}");
        }
        // Front feet land on flat ground in this scenario.
        for leg in [0usize, 1] {
            let h = terrain.height(landings[leg].x, landings[leg].y);
            assert!(h.abs() < 1e-9, "leg {leg}: height {h}");
        }
        // Spawn area stays flat.
        assert!(terrain.height(0.0, 0.0).abs() < 1e-12);
    }

    #[test]
    fn untrained_policy_yields_valid_report() {
        let morph = RobotMorphology::default();
        let motion = make_motion(&morph);
        let reward_cfg = RewardConfig::default();
        let mut env_cfg = EnvConfig::new(nalgebra::Vector3::new(0.3, 0.0, 0.0));
        env_cfg.pd = PdParams { kp: 1000.0, kd: 8.0 };
        env_cfg.spawn_jitter = 0.05;
        env_cfg.friction_range = (0.7, 0.7001);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let policy = ActorCritic::new(&[32, 16], 1.0, &mut rng);
        let report = run_eval(
            &policy,
            &motion,
            &morph,
            &reward_cfg,
            &env_cfg,
            Scenario::Fl,
            0.05,
            3,
            9,
        )
        .unwrap();
        assert_eq!(report.episodes.len(), 3);
        let sr = report.success_rate();
        assert!((0.0..=1.0).contains(&sr));
        let csv = write_eval_csv(&report, "beef", 9);
        assert_eq!(csv.lines().count(), 3 + 3);
        assert!(csv.contains("FL"));
    }
}
