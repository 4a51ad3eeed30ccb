//! Rigid-body quadruped simulator: a single floating base with four
//! low-inertia 3-DOF legs, penalty contact against a heightfield, PD joint
//! control and semi-implicit Euler integration at the PD rate.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::contact::{contact_force, ContactParams, FootContact};
use super::terrain::Terrain;
use crate::morphology::{leg_fk, leg_jacobian, LegJointAngles, RobotMorphology, NUM_JOINTS, NUM_LEGS};
use crate::reference::ReferenceMotion;

pub const GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

/// Full simulator state.
#[derive(Debug, Clone)]
pub struct SimState {
    pub base_position: Vector3<f64>,
    pub base_orientation: UnitQuaternion<f64>,
    pub base_lin_vel: Vector3<f64>,
    /// Body-frame angular velocity, rad/s.
    pub base_ang_vel: Vector3<f64>,
    pub joint_positions: [f64; NUM_JOINTS],
    pub joint_velocities: [f64; NUM_JOINTS],
    pub foot_contact: [bool; NUM_LEGS],
    pub time: f64,
}

impl SimState {
    /// Robot at rest in the homing pose with the base at `(x, y)` and the
    /// feet just touching the local terrain height.
    pub fn homing(morph: &RobotMorphology, terrain: &Terrain, x: f64, y: f64) -> Self {
        let ground = terrain.height(x, y);
        Self {
            base_position: Vector3::new(x, y, ground + morph.homing_height),
            base_orientation: UnitQuaternion::identity(),
            base_lin_vel: Vector3::zeros(),
            base_ang_vel: Vector3::zeros(),
            joint_positions: morph.homing_joint_vector(),
            joint_velocities: [0.0; NUM_JOINTS],
            foot_contact: [false; NUM_LEGS],
            time: 0.0,
        }
    }
}

/// Joint PD gains, uniform across joints.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdParams {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdParams {
    fn default() -> Self {
        Self { kp: 20.0, kd: 0.8 }
    }
}

/// Physics-stepping parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Physics timestep, s.
    pub dt: f64,
    /// Reflected rotor inertia per joint, kg m^2.
    pub rotor_inertia: f64,
    pub contact: ContactParams,
    /// Base collision box (full extents), m.
    pub base_box: [f64; 3],
    /// Policy steps hold one target for this many physics ticks.
    pub decimation: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            rotor_inertia: 0.0025,
            contact: ContactParams::default(),
            base_box: [0.27, 0.19, 0.11],
            decimation: 20,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("numerical divergence at t = {time:.3} s: {what}")]
    NumericalDivergence { time: f64, what: String },
}

/// Per-tick outputs needed by rewards and logging.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Applied (clamped) PD torques.
    pub torques: [f64; NUM_JOINTS],
    /// World-frame contact force per foot.
    pub contact_forces: [Vector3<f64>; NUM_LEGS],
    pub base_collision: bool,
}

/// Advance one physics tick. `contacts` carries the per-foot stick-slip
/// anchors across ticks; `mu` is the terrain friction for this episode.
pub fn step(
    state: &mut SimState,
    joint_targets: &[f64; NUM_JOINTS],
    pd: &PdParams,
    terrain: &Terrain,
    mu: f64,
    morph: &RobotMorphology,
    params: &SimParams,
    contacts: &mut [FootContact; NUM_LEGS],
) -> Result<StepOutput, SimError> {
    let dt = params.dt;
    let rot = state.base_orientation;

    let mut torques = [0.0; NUM_JOINTS];
    let mut contact_forces = [Vector3::zeros(); NUM_LEGS];
    let mut total_force = Vector3::zeros();
    let mut total_moment = Vector3::zeros();
    let mut joint_acc = [0.0; NUM_JOINTS];

    for leg in 0..NUM_LEGS {
        let q = LegJointAngles::from_slice(&state.joint_positions[3 * leg..3 * leg + 3]);
        let qd = Vector3::new(
            state.joint_velocities[3 * leg],
            state.joint_velocities[3 * leg + 1],
            state.joint_velocities[3 * leg + 2],
        );
        let foot_body = leg_fk(q, leg, morph);
        let jac = leg_jacobian(q, leg, morph);
        let foot_world = state.base_position + rot * foot_body;
        let foot_vel = state.base_lin_vel
            + rot * (state.base_ang_vel.cross(&foot_body))
            + rot * (jac * qd);

        let f = contact_force(
            foot_world,
            foot_vel,
            terrain,
            &params.contact,
            mu,
            &mut contacts[leg],
        );
        contact_forces[leg] = f;
        state.foot_contact[leg] = contacts[leg].in_contact();
        total_force += f;
        total_moment += (foot_world - state.base_position).cross(&f);

        // PD torque plus the contact reaction on the joints. The derivative
        // term is integrated implicitly: with the small rotor inertia an
        // explicit damping update is unstable for realistic kd at 1 ms.
        let tau_contact = jac.transpose() * (rot.inverse() * f);
        for j in 0..3 {
            let idx = 3 * leg + j;
            let stiff = pd.kp * (joint_targets[idx] - state.joint_positions[idx]);
            let qd_new = (state.joint_velocities[idx]
                + dt * (stiff + tau_contact[j]) / params.rotor_inertia)
                / (1.0 + dt * pd.kd / params.rotor_inertia);
            let tau_pd = (stiff - pd.kd * qd_new)
                .clamp(-morph.torque_limit, morph.torque_limit);
            torques[idx] = tau_pd;
            joint_acc[idx] = (tau_pd + tau_contact[j]) / params.rotor_inertia;
        }
    }

    // Base translational dynamics.
    let lin_acc = total_force / morph.mass + GRAVITY;
    // Body-frame rotational dynamics.
    let inertia = morph.body_inertia();
    let omega = state.base_ang_vel;
    let torque_body = rot.inverse() * total_moment;
    let ang_acc = inertia
        .try_inverse()
        .expect("diagonal inertia is invertible")
        * (torque_body - omega.cross(&(inertia * omega)));

    // Semi-implicit Euler: velocities first, then positions.
    state.base_lin_vel += dt * lin_acc;
    state.base_position += dt * state.base_lin_vel;
    state.base_ang_vel += dt * ang_acc;
    state.base_orientation =
        rot * UnitQuaternion::from_scaled_axis(dt * state.base_ang_vel);
    for j in 0..NUM_JOINTS {
        state.joint_velocities[j] += dt * joint_acc[j];
        state.joint_positions[j] += dt * state.joint_velocities[j];
    }
    state.time += dt;

    if state.base_position.norm() > 100.0 {
        return Err(SimError::NumericalDivergence {
            time: state.time,
            what: format!("base position norm {:.1} m", state.base_position.norm()),
        });
    }
    for j in 0..NUM_JOINTS {
        if !state.joint_velocities[j].is_finite() || state.joint_velocities[j].abs() > 500.0 {
            return Err(SimError::NumericalDivergence {
                time: state.time,
                what: format!("joint {j} velocity {:.1} rad/s", state.joint_velocities[j]),
            });
        }
    }

    let base_collision = base_box_collides(state, terrain, params);
    Ok(StepOutput { torques, contact_forces, base_collision })
}

/// True when any corner of the body-frame base box is below the terrain.
pub fn base_box_collides(state: &SimState, terrain: &Terrain, params: &SimParams) -> bool {
    let [lx, ly, lz] = params.base_box;
    for sx in [-0.5, 0.5] {
        for sy in [-0.5, 0.5] {
            for sz in [-0.5, 0.5] {
                let corner = state.base_position
                    + state.base_orientation
                        * Vector3::new(sx * lx, sy * ly, sz * lz);
                if corner.z < terrain.height(corner.x, corner.y) {
                    return true;
                }
            }
        }
    }
    false
}

/// One logged policy step of an open-loop rollout.
#[derive(Debug, Clone)]
pub struct RolloutStep {
    pub state: SimState,
    /// Torques applied on the last physics tick of the policy step.
    pub torques: [f64; NUM_JOINTS],
    pub joint_targets: [f64; NUM_JOINTS],
    /// Contact forces on the last physics tick, per foot.
    pub contact_forces: [Vector3<f64>; NUM_LEGS],
    pub base_collision: bool,
}

/// Track the reference open loop: at each policy step the reference joint
/// positions become the PD targets for the next `decimation` ticks.
pub fn rollout_pd(
    motion: &ReferenceMotion,
    pd: &PdParams,
    terrain: &Terrain,
    mu: f64,
    morph: &RobotMorphology,
    params: &SimParams,
) -> Result<Vec<RolloutStep>, SimError> {
    let mut state = SimState::homing(morph, terrain, 0.0, 0.0);
    let mut contacts = [FootContact::default(); NUM_LEGS];
    let mut log = Vec::with_capacity(motion.len());
    for sample in &motion.samples {
        let targets = sample.joint_positions;
        let mut out = None;
        for _ in 0..params.decimation {
            out = Some(step(
                &mut state, &targets, pd, terrain, mu, morph, params, &mut contacts,
            )?);
        }
        let out = out.expect("decimation >= 1");
        log.push(RolloutStep {
            state: state.clone(),
            torques: out.torques,
            joint_targets: targets,
            contact_forces: out.contact_forces,
            base_collision: out.base_collision,
        });
    }
    Ok(log)
}
