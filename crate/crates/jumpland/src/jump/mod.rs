//! Kino-dynamic jump trajectory optimization over centroidal dynamics.
//!
//! The decision vector stacks the CoM state trajectory X (stance + flight),
//! stance joint trajectories Q, stance contact forces U, the two phase
//! durations t and the landing slack xi. Stance dynamics are transcribed
//! trapezoidally; flight follows the closed-form ballistic propagation.

pub mod grf;

mod cost;
mod problem;
mod reshape;
mod solve;

pub use cost::{CostTerms, JumpCost};
pub use problem::{build_initial_guess, build_problem, Layout, ProblemData};
pub use reshape::reshape_flight_joints;
pub use solve::{solve_jump, solve_jump_detailed, JumpSolution};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::{KinematicsError, NUM_JOINTS, NUM_LEGS};
use crate::nlp::SolveStatus;

/// Commanded jump: landing CoM displacement relative to the start pose plus
/// optional adjustments to the feet polygon applied after take-off.
#[derive(Debug, Clone, Copy)]
pub struct JumpCommand {
    pub displacement: Vector3<f64>,
    pub landing_polygon_offsets: [Vector3<f64>; NUM_LEGS],
}

impl JumpCommand {
    pub fn displacement(dx: f64, dy: f64, dz: f64) -> Self {
        Self {
            displacement: Vector3::new(dx, dy, dz),
            landing_polygon_offsets: [Vector3::zeros(); NUM_LEGS],
        }
    }

    pub fn with_polygon_offsets(mut self, offsets: [Vector3<f64>; NUM_LEGS]) -> Self {
        self.landing_polygon_offsets = offsets;
        self
    }

    /// Sanity box on commands accepted before any solve is attempted.
    pub fn validate(&self) -> Result<(), JumpError> {
        let d = self.displacement;
        if d.x.abs() > 2.0 || d.y.abs() > 2.0 || d.z < -0.5 || d.z > 0.5 {
            return Err(JumpError::CommandOutOfRange {
                dx: d.x,
                dy: d.y,
                dz: d.z,
            });
        }
        Ok(())
    }
}

/// Landing-polygon presets. `narrow` pulls both sides in by 6 cm (12 cm
/// total width change) and moves the rear feet 6 cm forward; `wide` pushes
/// both sides out by 8 cm (16 cm total) and moves the front feet 6 cm
/// forward.
pub fn polygon_preset(name: &str) -> Option<[Vector3<f64>; NUM_LEGS]> {
    match name {
        "none" | "homing" => Some([Vector3::zeros(); NUM_LEGS]),
        "narrow" => Some([
            Vector3::new(0.0, -0.06, 0.0),  // FL
            Vector3::new(0.0, 0.06, 0.0),   // FR
            Vector3::new(0.06, -0.06, 0.0), // HL
            Vector3::new(0.06, 0.06, 0.0),  // HR
        ]),
        "wide" => Some([
            Vector3::new(0.06, 0.08, 0.0),  // FL
            Vector3::new(0.06, -0.08, 0.0), // FR
            Vector3::new(0.0, 0.08, 0.0),   // HL
            Vector3::new(0.0, -0.08, 0.0),  // HR
        ]),
        _ => None,
    }
}

/// CoM position, velocity and centroidal angular momentum at one knot.
/// The momentum is held at its initial value (zero) for the whole plan.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CentroidalState {
    pub r: Vector3<f64>,
    pub r_dot: Vector3<f64>,
    pub h: Vector3<f64>,
}

/// Trajectory-optimization configuration: cost weights, knot counts,
/// friction, slack tolerance and solver settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToConfig {
    /// Cost weights: force smoothness, force magnitude, take-off velocity,
    /// flight duration, landing velocity, total time, joint deviation,
    /// landing slack.
    pub weights: [f64; 8],
    pub mu: f64,
    pub n_s: usize,
    pub n_f: usize,
    /// Maximum accepted landing-slack norm, m.
    pub slack_tolerance: f64,
    pub feasibility_tol: f64,
    pub stationarity_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for ToConfig {
    fn default() -> Self {
        Self {
            weights: [1e-4, 1e-5, 0.1, 0.1, 0.1, 1.0, 0.5, 1e4],
            mu: 0.6,
            n_s: 100,
            n_f: 100,
            slack_tolerance: 0.05,
            feasibility_tol: 1e-6,
            stationarity_tol: 1e-4,
            max_outer: 80,
            max_inner: 250,
        }
    }
}

/// The solved jump trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryKnots {
    /// CoM states, stance knots then flight knots (n_s + n_f entries).
    pub states: Vec<CentroidalState>,
    /// Stance joint positions, leg-major 12 per knot (n_s entries).
    pub joints: Vec<[f64; NUM_JOINTS]>,
    /// Stance contact forces per foot (n_s entries).
    pub forces: Vec<[Vector3<f64>; NUM_LEGS]>,
    pub t_stance: f64,
    pub t_flight: f64,
    pub slack: Vector3<f64>,
    /// Stance contact points, world frame.
    pub contact_points: [Vector3<f64>; NUM_LEGS],
    pub n_s: usize,
    pub n_f: usize,
}

impl TrajectoryKnots {
    pub fn n_contacts(&self) -> usize {
        NUM_LEGS
    }

    pub fn n_total(&self) -> usize {
        self.n_s + self.n_f
    }

    pub fn takeoff_state(&self) -> &CentroidalState {
        &self.states[self.n_s - 1]
    }

    pub fn landing_state(&self) -> &CentroidalState {
        &self.states[self.n_s + self.n_f - 1]
    }

    pub fn dt_stance(&self) -> f64 {
        self.t_stance / (self.n_s as f64 - 1.0)
    }

    pub fn dt_flight(&self) -> f64 {
        self.t_flight / (self.n_f as f64 - 1.0)
    }
}

#[derive(Debug, Error)]
pub enum JumpError {
    #[error("command ({dx:.2}, {dy:.2}, {dz:.2}) outside the sanity box |dx|,|dy| <= 2 m, dz in [-0.5, 0.5] m")]
    CommandOutOfRange { dx: f64, dy: f64, dz: f64 },
    #[error("plan failed: solver status {status:?}, slack {slack_norm:.4} m (tolerance {slack_tolerance})")]
    PlanFailed {
        status: SolveStatus,
        slack_norm: f64,
        slack_tolerance: f64,
    },
    #[error("landing polygon leaves the leg workspace: {0}")]
    OutOfReach(#[from] KinematicsError),
    #[error(transparent)]
    Grf(#[from] grf::GrfError),
}
