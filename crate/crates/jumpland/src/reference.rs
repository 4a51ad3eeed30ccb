//! Policy-rate reference motion resampled from the optimized trajectory,
//! with per-step phase labels and the jump trigger timeline.

use nalgebra::{UnitQuaternion, Vector3};
use thiserror::Error;

use crate::jump::TrajectoryKnots;
use crate::morphology::{RobotMorphology, NUM_JOINTS};

/// Motion phase of one reference sample. Boundary ties resolve toward the
/// later phase, so the nominal touch-down sample is already `Landing`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    PreTrigger,
    Stance,
    Flight,
    Landing,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::PreTrigger => "pre_trigger",
            Phase::Stance => "stance",
            Phase::Flight => "flight",
            Phase::Landing => "landing",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceSample {
    pub base_position: Vector3<f64>,
    pub base_orientation: UnitQuaternion<f64>,
    pub joint_positions: [f64; NUM_JOINTS],
    pub phase: Phase,
}

#[derive(Debug, Clone)]
pub struct ReferenceMotion {
    pub dt: f64,
    pub samples: Vec<ReferenceSample>,
    pub trigger_step: usize,
    pub takeoff_step: usize,
    pub touchdown_step: usize,
}

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("step {step} outside episode of {len} samples")]
    StepOutOfRange { step: usize, len: usize },
}

/// Resample the trajectory onto the policy grid. `flight_joints` supplies
/// the joint reference over the flight knots (and its final entry is the
/// held landing configuration).
pub fn resample(
    knots: &TrajectoryKnots,
    flight_joints: &[[f64; NUM_JOINTS]],
    morph: &RobotMorphology,
    dt: f64,
    pre_trigger: f64,
    post_landing: f64,
) -> ReferenceMotion {
    assert!(dt > 0.0, "policy period must be positive");
    assert!(flight_joints.len() >= knots.n_f, "flight joint reference too short");

    let trigger_step = (pre_trigger / dt).round() as usize;
    let takeoff_step = trigger_step + (knots.t_stance / dt).round() as usize;
    let touchdown_step =
        trigger_step + ((knots.t_stance + knots.t_flight) / dt).round() as usize;
    let total_steps =
        ((pre_trigger + knots.t_stance + knots.t_flight + post_landing) / dt).round() as usize;

    let homing_pose = Vector3::new(0.0, 0.0, morph.homing_height);
    let homing_joints = morph.homing_joint_vector();
    let landing_joints = *flight_joints.last().expect("non-empty flight reference");
    let landing_state = knots.landing_state();
    let dt_s = knots.dt_stance();
    let dt_f = knots.dt_flight();

    let component =
        |states: &dyn Fn(usize) -> f64, len: usize, pos: f64| lerp_knots_fn(states, len, pos);

    let mut samples = Vec::with_capacity(total_steps);
    for step in 0..total_steps {
        let phase = phase_of(step, trigger_step, takeoff_step, touchdown_step);
        let sample = match phase {
            Phase::PreTrigger => ReferenceSample {
                base_position: homing_pose,
                base_orientation: UnitQuaternion::identity(),
                joint_positions: homing_joints,
                phase,
            },
            Phase::Stance => {
                let tau = step as f64 * dt - trigger_step as f64 * dt;
                let pos = (tau / dt_s).min(knots.n_s as f64 - 1.0);
                let mut joints = [0.0; NUM_JOINTS];
                for j in 0..NUM_JOINTS {
                    joints[j] =
                        component(&|k| knots.joints[k][j], knots.n_s, pos);
                }
                ReferenceSample {
                    base_position: Vector3::new(
                        component(&|k| knots.states[k].r.x, knots.n_s, pos),
                        component(&|k| knots.states[k].r.y, knots.n_s, pos),
                        component(&|k| knots.states[k].r.z, knots.n_s, pos),
                    ),
                    base_orientation: UnitQuaternion::identity(),
                    joint_positions: joints,
                    phase,
                }
            }
            Phase::Flight => {
                let tau = step as f64 * dt - takeoff_step as f64 * dt;
                let pos = (tau / dt_f).min(knots.n_f as f64 - 1.0);
                let base = knots.n_s;
                let mut joints = [0.0; NUM_JOINTS];
                for j in 0..NUM_JOINTS {
                    joints[j] = component(&|k| flight_joints[k][j], knots.n_f, pos);
                }
                ReferenceSample {
                    base_position: Vector3::new(
                        component(&|k| knots.states[base + k].r.x, knots.n_f, pos),
                        component(&|k| knots.states[base + k].r.y, knots.n_f, pos),
                        component(&|k| knots.states[base + k].r.z, knots.n_f, pos),
                    ),
                    base_orientation: UnitQuaternion::identity(),
                    joint_positions: joints,
                    phase,
                }
            }
            Phase::Landing => ReferenceSample {
                base_position: landing_state.r,
                base_orientation: UnitQuaternion::identity(),
                joint_positions: landing_joints,
                phase,
            },
        };
        samples.push(sample);
    }

    ReferenceMotion { dt, samples, trigger_step, takeoff_step, touchdown_step }
}

/// Linear interpolation over a uniformly spaced knot sequence; exact at the
/// knots (weight zero reproduces the knot value bitwise).
fn lerp_knots_fn(value_at: &dyn Fn(usize) -> f64, len: usize, pos: f64) -> f64 {
    let i = (pos.floor() as usize).min(len - 1);
    let w = pos - i as f64;
    if w == 0.0 || i + 1 >= len {
        value_at(i)
    } else {
        (1.0 - w) * value_at(i) + w * value_at(i + 1)
    }
}

fn phase_of(step: usize, trigger: usize, takeoff: usize, touchdown: usize) -> Phase {
    if step >= touchdown {
        Phase::Landing
    } else if step >= takeoff {
        Phase::Flight
    } else if step >= trigger {
        Phase::Stance
    } else {
        Phase::PreTrigger
    }
}

impl ReferenceMotion {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn phase_at(&self, step: usize) -> Result<Phase, ReferenceError> {
        self.samples
            .get(step)
            .map(|s| s.phase)
            .ok_or(ReferenceError::StepOutOfRange { step, len: self.samples.len() })
    }
}
