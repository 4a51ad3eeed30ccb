//! Physics sanity checks for the simulator: conservation laws, static
//! equilibrium, clamping, determinism and open-loop reference tracking.

use jumpland::jump::{reshape_flight_joints, solve_jump, JumpCommand, ToConfig};
use jumpland::morphology::{RobotMorphology, NUM_JOINTS, NUM_LEGS};
use jumpland::reference::{resample, Phase};
use jumpland::sim::{
    generate_terrain, rollout_pd, step, FootContact, PdParams, SimParams, SimState, Terrain,
    TerrainParams,
};
use nalgebra::Vector3;

fn base_energy(state: &SimState, morph: &RobotMorphology) -> f64 {
    let v = state.base_lin_vel;
    let w = state.base_ang_vel;
    0.5 * morph.mass * v.norm_squared()
        + morph.mass * 9.81 * state.base_position.z
        + 0.5 * (w.dot(&(morph.body_inertia() * w)))
}

#[test]
fn airborne_energy_conserved_within_one_tenth_percent() {
    let morph = RobotMorphology::default();
    let terrain = Terrain::flat(0.8);
    let params = SimParams::default();
    let pd = PdParams { kp: 0.0, kd: 0.0 };
    let mut state = SimState::homing(&morph, &terrain, 0.0, 0.0);
    state.base_position.z = 3.0;
    state.base_lin_vel = Vector3::new(3.0, 1.0, 9.0);
    state.base_ang_vel = Vector3::new(1.0, 2.0, 1.0);
    let mut contacts = [FootContact::default(); NUM_LEGS];
    let targets = morph.homing_joint_vector();

    let e0 = base_energy(&state, &morph);
    for _ in 0..1000 {
        let out = step(
            &mut state, &targets, &pd, &terrain, 0.8, &morph, &params, &mut contacts,
        )
        .expect("no divergence");
        assert!(out.contact_forces.iter().all(|f| f.norm() == 0.0), "must stay airborne");
    }
    let e1 = base_energy(&state, &morph);
    let rel = ((e1 - e0) / e0).abs();
    assert!(rel < 1e-3, "energy drift {rel:.2e} over 1 s");
}

#[test]
fn free_fall_velocity_increment_is_exact() {
    let morph = RobotMorphology::default();
    let terrain = Terrain::flat(0.8);
    let params = SimParams::default();
    let pd = PdParams { kp: 0.0, kd: 0.0 };
    let mut state = SimState::homing(&morph, &terrain, 0.0, 0.0);
    state.base_position.z = 5.0;
    let mut contacts = [FootContact::default(); NUM_LEGS];
    let targets = morph.homing_joint_vector();
    let v0 = state.base_lin_vel.z;
    step(&mut state, &targets, &pd, &terrain, 0.8, &morph, &params, &mut contacts).unwrap();
    let dv = state.base_lin_vel.z - v0;
    assert!((dv + 9.81 * params.dt).abs() < 1e-15, "dv {dv}");
}

#[test]
fn static_stand_balances_weight_within_one_percent() {
    let morph = RobotMorphology::default();
    let terrain = Terrain::flat(0.8);
    let params = SimParams::default();
    let pd = PdParams { kp: 300.0, kd: 10.0 };
    let mut state = SimState::homing(&morph, &terrain, 0.0, 0.0);
    let mut contacts = [FootContact::default(); NUM_LEGS];
    let targets = morph.homing_joint_vector();
    let mut total_normal = 0.0;
    for k in 0..1000 {
        let out = step(
            &mut state, &targets, &pd, &terrain, 0.8, &morph, &params, &mut contacts,
        )
        .expect("no divergence");
        if k == 999 {
            total_normal = out.contact_forces.iter().map(|f| f.z).sum();
        }
    }
    let weight = morph.mass * 9.81;
    assert!(
        (total_normal / weight - 1.0).abs() < 0.01,
        "total normal {total_normal:.2} N vs weight {weight:.2} N"
    );
    // The base should still be near the homing height.
    assert!((state.base_position.z - morph.homing_height).abs() < 0.03);
    assert!(state.foot_contact.iter().all(|&c| c));
}

#[test]
fn pd_torque_clamped_at_limit() {
    let morph = RobotMorphology::default();
    let terrain = Terrain::flat(0.8);
    let params = SimParams::default();
    let pd = PdParams { kp: 300.0, kd: 10.0 };
    let mut state = SimState::homing(&morph, &terrain, 0.0, 0.0);
    state.base_position.z = 5.0;
    let mut contacts = [FootContact::default(); NUM_LEGS];
    // Demand a 2 rad error on every joint: 600 N m raw, clamped to 33.5.
    let mut targets = morph.homing_joint_vector();
    for t in &mut targets {
        *t += 2.0;
    }
    let out =
        step(&mut state, &targets, &pd, &terrain, 0.8, &morph, &params, &mut contacts).unwrap();
    for tau in out.torques {
        assert!(tau.abs() <= morph.torque_limit + 1e-12);
    }
    assert!(out.torques.iter().any(|t| (t.abs() - morph.torque_limit).abs() < 1e-12));
}

#[test]
fn divergence_detected_on_wild_state() {
    let morph = RobotMorphology::default();
    let terrain = Terrain::flat(0.8);
    let params = SimParams::default();
    let pd = PdParams::default();
    let mut state = SimState::homing(&morph, &terrain, 0.0, 0.0);
    state.base_lin_vel = Vector3::new(2e5, 0.0, 0.0);
    let mut contacts = [FootContact::default(); NUM_LEGS];
    let targets = morph.homing_joint_vector();
    let r = step(&mut state, &targets, &pd, &terrain, 0.8, &morph, &params, &mut contacts);
    assert!(r.is_err());
}

fn small_plan_motion(
    morph: &RobotMorphology,
) -> (jumpland::reference::ReferenceMotion, ToConfig) {
    let cfg = ToConfig { n_s: 12, n_f: 12, ..ToConfig::default() };
    let cmd = JumpCommand::displacement(0.8, 0.0, 0.0);
    let knots = solve_jump(&cmd, morph, &cfg).expect("plan converges");
    let flight = reshape_flight_joints(&knots, &cmd, morph, 4).expect("reshape");
    let motion = resample(&knots, &flight, morph, 0.02, 0.5, 1.5);
    (motion, cfg)
}

#[test]
fn open_loop_rollout_becomes_airborne_during_reference_flight() {
    let morph = RobotMorphology::default();
    let terrain = Terrain::flat(0.8);
    let params = SimParams::default();
    let pd = PdParams { kp: 1000.0, kd: 8.0 };
    let (motion, _) = small_plan_motion(&morph);

    let log = rollout_pd(&motion, &pd, &terrain, 0.8, &morph, &params).expect("rollout");
    assert_eq!(log.len(), motion.len());

    // Pre-trigger: the robot holds the homing height.
    for s in &log[5..motion.trigger_step] {
        assert!(
            (s.state.base_position.z - morph.homing_height).abs() < 0.02,
            "pre-trigger height {}",
            s.state.base_position.z
        );
    }

    // Reference flight window and simulated airborne window must overlap by
    // at least 80% of the reference window's duration.
    let flight_steps: Vec<usize> = (motion.takeoff_step..motion.touchdown_step).collect();
    let airborne = |s: &jumpland::sim::RolloutStep| {
        s.state.foot_contact.iter().all(|&c| !c)
    };
    let overlap = flight_steps.iter().filter(|&&k| airborne(&log[k])).count();
    let frac = overlap as f64 / flight_steps.len() as f64;
    assert!(frac >= 0.8, "airborne overlap {frac:.2} of reference flight window");
}

#[test]
fn rollout_is_deterministic() {
    let morph = RobotMorphology::default();
    let params = SimParams::default();
    let pd = PdParams { kp: 1000.0, kd: 8.0 };
    let terrain = generate_terrain(&TerrainParams::default(), 3).unwrap();
    let (motion, _) = small_plan_motion(&morph);
    let a = rollout_pd(&motion, &pd, &terrain, 0.6, &morph, &params).expect("rollout a");
    let b = rollout_pd(&motion, &pd, &terrain, 0.6, &morph, &params).expect("rollout b");
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.state.base_position, y.state.base_position);
        assert_eq!(x.state.joint_positions, y.state.joint_positions);
        assert_eq!(x.torques, y.torques);
    }
}

#[test]
fn airborne_com_acceleration_matches_gravity() {
    let morph = RobotMorphology::default();
    let terrain = Terrain::flat(0.8);
    let params = SimParams::default();
    let pd = PdParams { kp: 60.0, kd: 2.0 };
    let mut state = SimState::homing(&morph, &terrain, 0.0, 0.0);
    state.base_position.z = 2.0;
    let mut contacts = [FootContact::default(); NUM_LEGS];
    let targets = morph.homing_joint_vector();
    // Joints actively servo while airborne; the base must still free-fall.
    let mut t = targets;
    t[1] += 0.3;
    let v0 = state.base_lin_vel;
    let n = 100;
    for _ in 0..n {
        step(&mut state, &t, &pd, &terrain, 0.8, &morph, &params, &mut contacts).unwrap();
    }
    let acc = (state.base_lin_vel - v0) / (n as f64 * params.dt);
    assert!((acc - Vector3::new(0.0, 0.0, -9.81)).norm() < 1e-9, "acc {acc:?}");
}

#[test]
fn reference_phases_cover_episode() {
    let morph = RobotMorphology::default();
    let (motion, _) = small_plan_motion(&morph);
    assert_eq!(motion.phase_at(0).unwrap(), Phase::PreTrigger);
    assert_eq!(motion.phase_at(motion.touchdown_step).unwrap(), Phase::Landing);
    assert_eq!(motion.samples[0].joint_positions, morph.homing_joint_vector());
    let _ = NUM_JOINTS;
}
