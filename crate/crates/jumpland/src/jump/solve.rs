//! Solving the jump NLP and validating the resulting trajectory.

use nalgebra::Vector3;

use super::grf::distribute_grf;
use super::problem::{build_initial_guess, build_problem};
use super::{CentroidalState, JumpCommand, JumpError, ToConfig, TrajectoryKnots};
use crate::morphology::{leg_fk, leg_jacobian, LegJointAngles, RobotMorphology, NUM_LEGS};
use crate::nlp::{self, NlpSolution, SolveOptions, SolveStatus};

/// Outcome of a jump solve including solver diagnostics for reporting.
pub struct JumpSolution {
    pub knots: TrajectoryKnots,
    pub nlp: NlpSolution,
    pub solve_seconds: f64,
}

/// Plan a jump for the command; fails unless the solver converges and the
/// landing slack stays within tolerance.
pub fn solve_jump(
    cmd: &JumpCommand,
    morph: &RobotMorphology,
    cfg: &ToConfig,
) -> Result<TrajectoryKnots, JumpError> {
    solve_jump_detailed(cmd, morph, cfg).map(|s| s.knots)
}

pub fn solve_jump_detailed(
    cmd: &JumpCommand,
    morph: &RobotMorphology,
    cfg: &ToConfig,
) -> Result<JumpSolution, JumpError> {
    let (problem, data) = build_problem(cmd, morph, cfg)?;
    let x0 = build_initial_guess(&data);
    let options = SolveOptions {
        feasibility_tol: cfg.feasibility_tol,
        stationarity_tol: cfg.stationarity_tol,
        max_outer: cfg.max_outer,
        max_inner: cfg.max_inner,
        ..SolveOptions::default()
    };
    let started = std::time::Instant::now();
    let solution = nlp::solve(&problem, &x0, &options);
    let solve_seconds = started.elapsed().as_secs_f64();

    let l = data.layout;
    let slack = l.read_vec3(&solution.x_opt, l.xi());
    if solution.status != SolveStatus::Converged || slack.norm() > cfg.slack_tolerance {
        return Err(JumpError::PlanFailed {
            status: solution.status,
            slack_norm: slack.norm(),
            slack_tolerance: cfg.slack_tolerance,
        });
    }

    let x = &solution.x_opt;
    let t_stance = x[l.t_stance()];
    let t_flight = x[l.t_flight()];
    let mut states: Vec<CentroidalState> = (0..l.n_knots())
        .map(|k| CentroidalState {
            r: l.read_vec3(x, l.pos(k)),
            r_dot: l.read_vec3(x, l.vel(k)),
            h: Vector3::zeros(),
        })
        .collect();

    // Re-propagate the flight knots in closed form from the take-off state
    // so the ballistic relation holds to machine precision rather than to
    // the solver's feasibility tolerance.
    let g = data.gravity;
    let dt_f = t_flight / (l.n_f as f64 - 1.0);
    let takeoff = states[l.n_s - 1];
    for j in 0..l.n_f {
        let t = j as f64 * dt_f;
        states[l.n_s + j] = CentroidalState {
            r: takeoff.r + takeoff.r_dot * t + 0.5 * g * t * t,
            r_dot: takeoff.r_dot + g * t,
            h: Vector3::zeros(),
        };
    }

    let joints = (0..l.n_s)
        .map(|k| {
            let mut q = [0.0; 12];
            q.copy_from_slice(&x[l.q(k)..l.q(k) + 12]);
            q
        })
        .collect();
    let forces = (0..l.n_s)
        .map(|k| core::array::from_fn(|i| l.read_vec3(x, l.u(k) + 3 * i)))
        .collect();

    let knots = TrajectoryKnots {
        states,
        joints,
        forces,
        t_stance,
        t_flight,
        slack,
        contact_points: data.contacts,
        n_s: l.n_s,
        n_f: l.n_f,
    };
    Ok(JumpSolution { knots, nlp: solution, solve_seconds })
}

impl TrajectoryKnots {
    /// Max trapezoidal stance-dynamics residual over all knot pairs.
    pub fn stance_dynamics_residual(&self, mass: f64) -> f64 {
        let g = Vector3::from(crate::GRAVITY);
        let dt = self.dt_stance();
        let accel = |k: usize| -> Vector3<f64> {
            let mut f = Vector3::zeros();
            for fi in &self.forces[k] {
                f += fi;
            }
            f / mass + g
        };
        let mut worst: f64 = 0.0;
        for k in 0..self.n_s - 1 {
            let (a, b) = (&self.states[k], &self.states[k + 1]);
            let pos_res = b.r - a.r - 0.5 * dt * (a.r_dot + b.r_dot);
            let vel_res = b.r_dot - a.r_dot - 0.5 * dt * (accel(k) + accel(k + 1));
            worst = worst.max(pos_res.amax()).max(vel_res.amax());
        }
        worst
    }

    /// Max deviation of the flight knots from closed-form ballistic
    /// propagation of the take-off state.
    pub fn flight_ballistic_residual(&self) -> f64 {
        let g = Vector3::from(crate::GRAVITY);
        let dt = self.dt_flight();
        let takeoff = self.states[self.n_s - 1];
        let mut worst: f64 = 0.0;
        for j in 0..self.n_f {
            let t = j as f64 * dt;
            let r = takeoff.r + takeoff.r_dot * t + 0.5 * g * t * t;
            let v = takeoff.r_dot + g * t;
            let s = &self.states[self.n_s + j];
            worst = worst.max((s.r - r).amax()).max((s.r_dot - v).amax());
        }
        worst
    }

    /// Max FK-vs-contact-point error over stance knots and legs.
    pub fn kinematics_residual(&self, morph: &RobotMorphology) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.n_s {
            for i in 0..NUM_LEGS {
                let q = LegJointAngles::from_slice(&self.joints[k][3 * i..3 * i + 3]);
                let foot = self.states[k].r + leg_fk(q, i, morph);
                worst = worst.max((foot - self.contact_points[i]).amax());
            }
        }
        worst
    }

    /// Largest joint torque magnitude implied by the contact forces.
    pub fn max_joint_torque(&self, morph: &RobotMorphology) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.n_s {
            for i in 0..NUM_LEGS {
                let q = LegJointAngles::from_slice(&self.joints[k][3 * i..3 * i + 3]);
                let tau = leg_jacobian(q, i, morph).transpose() * self.forces[k][i];
                worst = worst.max(tau.amax());
            }
        }
        worst
    }

    /// Worst friction-pyramid violation (positive means violated).
    pub fn friction_violation(&self, mu: f64) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for k in 0..self.n_s {
            for f in &self.forces[k] {
                worst = worst
                    .max(f.x.abs() - mu * f.z)
                    .max(f.y.abs() - mu * f.z)
                    .max(-f.z);
            }
        }
        worst
    }

    /// Max difference between the stored per-foot forces and the
    /// minimum-norm distribution of their net force.
    pub fn grf_consistency(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.n_s {
            let mut net = Vector3::zeros();
            for f in &self.forces[k] {
                net += f;
            }
            if let Ok(ideal) = distribute_grf(net, self.states[k].r, &self.contact_points) {
                for i in 0..NUM_LEGS {
                    worst = worst.max((self.forces[k][i] - ideal[i]).amax());
                }
            }
        }
        worst
    }
}
