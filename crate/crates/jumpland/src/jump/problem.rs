//! Decision-vector layout and constraint assembly for the jump NLP.

use std::sync::Arc;

use nalgebra::Vector3;

use super::cost::JumpCost;
use super::grf::{distribution_matrix, distribution_matrix_gradient};
use super::{JumpCommand, JumpError, ToConfig};
use crate::morphology::{
    leg_fk, leg_fk_hessian, leg_jacobian, LegJointAngles, RobotMorphology, NUM_JOINTS, NUM_LEGS,
};
use crate::nlp::{Constraint, ConstraintKind, NlpProblem};
use crate::GRAVITY;

/// Index layout of the decision vector:
/// X (6 per knot, stance then flight), Q (12 per stance knot),
/// U (12 per stance knot), t (2), xi (3).
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n_s: usize,
    pub n_f: usize,
}

impl Layout {
    pub fn n_knots(&self) -> usize {
        self.n_s + self.n_f
    }

    pub fn n_vars(&self) -> usize {
        6 * self.n_knots() + 24 * self.n_s + 2 + 3
    }

    pub fn pos(&self, k: usize) -> usize {
        6 * k
    }

    pub fn vel(&self, k: usize) -> usize {
        6 * k + 3
    }

    pub fn q(&self, k: usize) -> usize {
        6 * self.n_knots() + 12 * k
    }

    pub fn u(&self, k: usize) -> usize {
        6 * self.n_knots() + 12 * self.n_s + 12 * k
    }

    pub fn t_stance(&self) -> usize {
        6 * self.n_knots() + 24 * self.n_s
    }

    pub fn t_flight(&self) -> usize {
        self.t_stance() + 1
    }

    pub fn xi(&self) -> usize {
        self.t_stance() + 2
    }

    pub fn read_vec3(&self, x: &[f64], idx: usize) -> Vector3<f64> {
        Vector3::new(x[idx], x[idx + 1], x[idx + 2])
    }
}

/// Everything the constraints and cost share: geometry, command, physics.
pub struct ProblemData {
    pub layout: Layout,
    pub morph: RobotMorphology,
    pub mu: f64,
    /// Stance contact points, world frame, on the ground plane.
    pub contacts: [Vector3<f64>; NUM_LEGS],
    pub r_start: Vector3<f64>,
    /// Absolute landing CoM target.
    pub r_target: Vector3<f64>,
    pub gravity: Vector3<f64>,
    pub q_home: [f64; NUM_JOINTS],
}

impl ProblemData {
    pub fn new(cmd: &JumpCommand, morph: &RobotMorphology, cfg: &ToConfig) -> Result<Self, JumpError> {
        cmd.validate()?;
        let r_start = Vector3::new(0.0, 0.0, morph.homing_height);
        let contacts = core::array::from_fn(|i| {
            let foot = r_start + leg_fk(morph.homing_angles(), i, morph);
            Vector3::new(foot.x, foot.y, 0.0)
        });
        Ok(Self {
            layout: Layout { n_s: cfg.n_s, n_f: cfg.n_f },
            morph: morph.clone(),
            mu: cfg.mu,
            contacts,
            r_start,
            r_target: r_start + cmd.displacement,
            gravity: Vector3::from(GRAVITY),
            q_home: morph.homing_joint_vector(),
        })
    }

    fn dt_stance_of(&self, t_s: f64) -> f64 {
        t_s / (self.layout.n_s as f64 - 1.0)
    }

    fn dt_flight_of(&self, t_f: f64) -> f64 {
        t_f / (self.layout.n_f as f64 - 1.0)
    }
}

/// X_0 pinned to the homing state at rest.
struct InitialState {
    data: Arc<ProblemData>,
}

impl Constraint for InitialState {
    fn dim(&self) -> usize {
        6
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }
    fn name(&self) -> &str {
        "initial_state"
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for a in 0..3 {
            out[a] = x[a] - self.data.r_start[a];
            out[3 + a] = x[3 + a];
        }
    }
    fn jacobian(&self, _x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        for j in 0..6 {
            emit(j, j, 1.0);
        }
    }
}

/// Trapezoidal transcription of the stance centroidal dynamics.
/// Nominal phase durations used for the initial guess and for scaling the
/// transcription residuals.
const T_STANCE_INIT: f64 = 0.6;
const T_FLIGHT_INIT: f64 = 0.4;

struct StanceDynamics {
    data: Arc<ProblemData>,
}

impl StanceDynamics {
    /// Residuals are defects divided by the nominal knot spacing, so their
    /// magnitude does not shrink as the discretization is refined. Without
    /// this the quadratic penalty weakens with resolution and early outer
    /// iterations can trade dynamics violations for cost.
    fn scale(&self) -> f64 {
        (self.data.layout.n_s as f64 - 1.0) / T_STANCE_INIT
    }
    fn accel(&self, x: &[f64], k: usize, a: usize) -> f64 {
        let l = &self.data.layout;
        let mut f = 0.0;
        for i in 0..NUM_LEGS {
            f += x[l.u(k) + 3 * i + a];
        }
        f / self.data.morph.mass + self.data.gravity[a]
    }
}

impl Constraint for StanceDynamics {
    fn dim(&self) -> usize {
        6 * (self.data.layout.n_s - 1)
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }
    fn name(&self) -> &str {
        "stance_dynamics"
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let l = &self.data.layout;
        let s = self.scale();
        let dt = self.data.dt_stance_of(x[l.t_stance()]);
        for k in 0..l.n_s - 1 {
            for a in 0..3 {
                let row = 6 * k + a;
                out[row] = s
                    * (x[l.pos(k + 1) + a]
                        - x[l.pos(k) + a]
                        - 0.5 * dt * (x[l.vel(k) + a] + x[l.vel(k + 1) + a]));
                let acc = self.accel(x, k, a) + self.accel(x, k + 1, a);
                out[row + 3] =
                    s * (x[l.vel(k + 1) + a] - x[l.vel(k) + a] - 0.5 * dt * acc);
            }
        }
    }
    fn jacobian(&self, x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        let l = &self.data.layout;
        let s = self.scale();
        let dt = self.data.dt_stance_of(x[l.t_stance()]);
        let dtdts = 1.0 / (l.n_s as f64 - 1.0);
        let inv_m = 1.0 / self.data.morph.mass;
        for k in 0..l.n_s - 1 {
            for a in 0..3 {
                let row = 6 * k + a;
                emit(row, l.pos(k + 1) + a, s);
                emit(row, l.pos(k) + a, -s);
                emit(row, l.vel(k) + a, -0.5 * s * dt);
                emit(row, l.vel(k + 1) + a, -0.5 * s * dt);
                emit(
                    row,
                    l.t_stance(),
                    -0.5 * s * dtdts * (x[l.vel(k) + a] + x[l.vel(k + 1) + a]),
                );

                let vrow = row + 3;
                emit(vrow, l.vel(k + 1) + a, s);
                emit(vrow, l.vel(k) + a, -s);
                for i in 0..NUM_LEGS {
                    emit(vrow, l.u(k) + 3 * i + a, -0.5 * s * dt * inv_m);
                    emit(vrow, l.u(k + 1) + 3 * i + a, -0.5 * s * dt * inv_m);
                }
                let acc = self.accel(x, k, a) + self.accel(x, k + 1, a);
                emit(vrow, l.t_stance(), -0.5 * s * dtdts * acc);
            }
        }
    }
}

/// First flight knot equals the take-off (last stance) knot.
struct TakeoffContinuity {
    data: Arc<ProblemData>,
}

impl Constraint for TakeoffContinuity {
    fn dim(&self) -> usize {
        6
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }
    fn name(&self) -> &str {
        "takeoff_continuity"
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let l = &self.data.layout;
        for j in 0..6 {
            out[j] = x[6 * l.n_s + j] - x[6 * (l.n_s - 1) + j];
        }
    }
    fn jacobian(&self, _x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        let l = &self.data.layout;
        for j in 0..6 {
            emit(j, 6 * l.n_s + j, 1.0);
            emit(j, 6 * (l.n_s - 1) + j, -1.0);
        }
    }
}

/// Ballistic propagation between consecutive flight knots.
struct FlightDynamics {
    data: Arc<ProblemData>,
}

impl FlightDynamics {
    /// Same resolution-independent residual scaling as [`StanceDynamics`].
    fn scale(&self) -> f64 {
        (self.data.layout.n_f as f64 - 1.0) / T_FLIGHT_INIT
    }
}

impl Constraint for FlightDynamics {
    fn dim(&self) -> usize {
        6 * (self.data.layout.n_f - 1)
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }
    fn name(&self) -> &str {
        "flight_dynamics"
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let l = &self.data.layout;
        let s = self.scale();
        let dt = self.data.dt_flight_of(x[l.t_flight()]);
        let g = self.data.gravity;
        for j in 0..l.n_f - 1 {
            let k = l.n_s + j;
            for a in 0..3 {
                let row = 6 * j + a;
                out[row] = s
                    * (x[l.pos(k + 1) + a]
                        - x[l.pos(k) + a]
                        - dt * x[l.vel(k) + a]
                        - 0.5 * g[a] * dt * dt);
                out[row + 3] = s * (x[l.vel(k + 1) + a] - x[l.vel(k) + a] - g[a] * dt);
            }
        }
    }
    fn jacobian(&self, x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        let l = &self.data.layout;
        let s = self.scale();
        let dt = self.data.dt_flight_of(x[l.t_flight()]);
        let dtdtf = 1.0 / (l.n_f as f64 - 1.0);
        let g = self.data.gravity;
        for j in 0..l.n_f - 1 {
            let k = l.n_s + j;
            for a in 0..3 {
                let row = 6 * j + a;
                emit(row, l.pos(k + 1) + a, s);
                emit(row, l.pos(k) + a, -s);
                emit(row, l.vel(k) + a, -s * dt);
                emit(row, l.t_flight(), -s * dtdtf * (x[l.vel(k) + a] + g[a] * dt));
                let vrow = row + 3;
                emit(vrow, l.vel(k + 1) + a, s);
                emit(vrow, l.vel(k) + a, -s);
                emit(vrow, l.t_flight(), -s * dtdtf * g[a]);
            }
        }
    }
}

/// Landing CoM hits the commanded target up to the slack xi.
struct LandingTarget {
    data: Arc<ProblemData>,
}

impl Constraint for LandingTarget {
    fn dim(&self) -> usize {
        3
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }
    fn name(&self) -> &str {
        "landing_target"
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let l = &self.data.layout;
        let last = l.n_knots() - 1;
        for a in 0..3 {
            out[a] = x[l.pos(last) + a] - self.data.r_target[a] - x[l.xi() + a];
        }
    }
    fn jacobian(&self, _x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        let l = &self.data.layout;
        let last = l.n_knots() - 1;
        for a in 0..3 {
            emit(a, l.pos(last) + a, 1.0);
            emit(a, l.xi() + a, -1.0);
        }
    }
}

/// FK consistency: foot of every leg stays on its contact point at every
/// stance knot.
struct Kinematics {
    data: Arc<ProblemData>,
}

impl Constraint for Kinematics {
    fn dim(&self) -> usize {
        12 * self.data.layout.n_s
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }
    fn name(&self) -> &str {
        "kinematics"
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let l = &self.data.layout;
        let m = &self.data.morph;
        for k in 0..l.n_s {
            let r = l.read_vec3(x, l.pos(k));
            for i in 0..NUM_LEGS {
                let q = LegJointAngles::from_slice(&x[l.q(k) + 3 * i..l.q(k) + 3 * i + 3]);
                let foot = leg_fk(q, i, m);
                let c = self.data.contacts[i];
                for a in 0..3 {
                    out[12 * k + 3 * i + a] = foot[a] + r[a] - c[a];
                }
            }
        }
    }
    fn jacobian(&self, x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        let l = &self.data.layout;
        let m = &self.data.morph;
        for k in 0..l.n_s {
            for i in 0..NUM_LEGS {
                let q = LegJointAngles::from_slice(&x[l.q(k) + 3 * i..l.q(k) + 3 * i + 3]);
                let jac = leg_jacobian(q, i, m);
                for a in 0..3 {
                    let row = 12 * k + 3 * i + a;
                    emit(row, l.pos(k) + a, 1.0);
                    for b in 0..3 {
                        emit(row, l.q(k) + 3 * i + b, jac[(a, b)]);
                    }
                }
            }
        }
    }
}

/// Forces at every stance knot equal the minimum-norm zero-moment
/// distribution of their own net force about the current CoM. Rows are
/// scaled by 1/(m g) so their Jacobian norms match the other blocks.
struct GrfDistribution {
    data: Arc<ProblemData>,
}

impl GrfDistribution {
    fn scale(&self) -> f64 {
        1.0 / (self.data.morph.mass * self.data.gravity.z.abs())
    }
}

impl Constraint for GrfDistribution {
    fn dim(&self) -> usize {
        12 * self.data.layout.n_s
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }
    fn name(&self) -> &str {
        "grf_distribution"
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let l = &self.data.layout;
        let s = self.scale();
        for k in 0..l.n_s {
            let r = l.read_vec3(x, l.pos(k));
            let mut net = Vector3::zeros();
            for i in 0..NUM_LEGS {
                net += l.read_vec3(x, l.u(k) + 3 * i);
            }
            match distribution_matrix(r, &self.data.contacts) {
                Ok(d) => {
                    let ideal = d * net;
                    for j in 0..12 {
                        out[12 * k + j] = s * (x[l.u(k) + j] - ideal[j]);
                    }
                }
                Err(_) => {
                    for j in 0..12 {
                        out[12 * k + j] = f64::NAN;
                    }
                }
            }
        }
    }
    fn jacobian(&self, x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        let l = &self.data.layout;
        for k in 0..l.n_s {
            let r = l.read_vec3(x, l.pos(k));
            let mut net = Vector3::zeros();
            for i in 0..NUM_LEGS {
                net += l.read_vec3(x, l.u(k) + 3 * i);
            }
            let (d, dd) = match (
                distribution_matrix(r, &self.data.contacts),
                distribution_matrix_gradient(r, &self.data.contacts),
            ) {
                (Ok(d), Ok(dd)) => (d, dd),
                _ => continue,
            };
            let s = self.scale();
            for row in 0..12 {
                let grow = 12 * k + row;
                // d(U - D S U)/dU = I - D S.
                for i in 0..NUM_LEGS {
                    for a in 0..3 {
                        let col = 3 * i + a;
                        let mut v = -d[(row, a)];
                        if col == row {
                            v += 1.0;
                        }
                        emit(grow, l.u(k) + col, s * v);
                    }
                }
                // d/dr_j = -(dD/dr_j) net.
                for j in 0..3 {
                    let v = -(dd[j].row(row) * net)[0];
                    emit(grow, l.pos(k) + j, s * v);
                }
            }
        }
    }
}

/// Linearized friction cone |f_x|, |f_y| <= mu f_z at every stance knot.
struct FrictionPyramid {
    data: Arc<ProblemData>,
}

impl Constraint for FrictionPyramid {
    fn dim(&self) -> usize {
        16 * self.data.layout.n_s
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Inequality
    }
    fn name(&self) -> &str {
        "friction_pyramid"
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let l = &self.data.layout;
        let mu = self.data.mu;
        for k in 0..l.n_s {
            for i in 0..NUM_LEGS {
                let fx = x[l.u(k) + 3 * i];
                let fy = x[l.u(k) + 3 * i + 1];
                let fz = x[l.u(k) + 3 * i + 2];
                let base = 16 * k + 4 * i;
                out[base] = fx - mu * fz;
                out[base + 1] = -fx - mu * fz;
                out[base + 2] = fy - mu * fz;
                out[base + 3] = -fy - mu * fz;
            }
        }
    }
    fn jacobian(&self, _x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        let l = &self.data.layout;
        let mu = self.data.mu;
        for k in 0..l.n_s {
            for i in 0..NUM_LEGS {
                let (cx, cy, cz) = (l.u(k) + 3 * i, l.u(k) + 3 * i + 1, l.u(k) + 3 * i + 2);
                let base = 16 * k + 4 * i;
                emit(base, cx, 1.0);
                emit(base, cz, -mu);
                emit(base + 1, cx, -1.0);
                emit(base + 1, cz, -mu);
                emit(base + 2, cy, 1.0);
                emit(base + 2, cz, -mu);
                emit(base + 3, cy, -1.0);
                emit(base + 3, cz, -mu);
            }
        }
    }
}

/// Joint-space torque limits |J(q)' f| <= tau_max at every stance knot.
struct TorqueLimit {
    data: Arc<ProblemData>,
}

impl Constraint for TorqueLimit {
    fn dim(&self) -> usize {
        24 * self.data.layout.n_s
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Inequality
    }
    fn name(&self) -> &str {
        "torque_limit"
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let l = &self.data.layout;
        let m = &self.data.morph;
        let tau_max = m.torque_limit;
        for k in 0..l.n_s {
            for i in 0..NUM_LEGS {
                let q = LegJointAngles::from_slice(&x[l.q(k) + 3 * i..l.q(k) + 3 * i + 3]);
                let f = l.read_vec3(x, l.u(k) + 3 * i);
                let tau = leg_jacobian(q, i, m).transpose() * f;
                for j in 0..3 {
                    let base = 24 * k + 6 * i + 2 * j;
                    out[base] = tau[j] - tau_max;
                    out[base + 1] = -tau[j] - tau_max;
                }
            }
        }
    }
    fn jacobian(&self, x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        let l = &self.data.layout;
        let m = &self.data.morph;
        for k in 0..l.n_s {
            for i in 0..NUM_LEGS {
                let q = LegJointAngles::from_slice(&x[l.q(k) + 3 * i..l.q(k) + 3 * i + 3]);
                let f = l.read_vec3(x, l.u(k) + 3 * i);
                let jac = leg_jacobian(q, i, m);
                let hess = leg_fk_hessian(q, i, m);
                for j in 0..3 {
                    let base = 24 * k + 6 * i + 2 * j;
                    for a in 0..3 {
                        // d tau_j / d f_a = J[a][j]
                        emit(base, l.u(k) + 3 * i + a, jac[(a, j)]);
                        emit(base + 1, l.u(k) + 3 * i + a, -jac[(a, j)]);
                    }
                    for b in 0..3 {
                        // d tau_j / d q_b = f . d^2 p / (dq_j dq_b)
                        let v = f.dot(&hess[j].column(b).into_owned());
                        emit(base, l.q(k) + 3 * i + b, v);
                        emit(base + 1, l.q(k) + 3 * i + b, -v);
                    }
                }
            }
        }
    }
}

/// Assemble the full jump NLP for a validated command.
pub fn build_problem(
    cmd: &JumpCommand,
    morph: &RobotMorphology,
    cfg: &ToConfig,
) -> Result<(NlpProblem, Arc<ProblemData>), JumpError> {
    let data = Arc::new(ProblemData::new(cmd, morph, cfg)?);
    let l = data.layout;
    let n = l.n_vars();

    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for k in 0..l.n_knots() {
        for a in 0..2 {
            lower[l.pos(k) + a] = -5.0;
            upper[l.pos(k) + a] = 5.0;
        }
        lower[l.pos(k) + 2] = 0.05;
        upper[l.pos(k) + 2] = 2.0;
        for a in 0..3 {
            lower[l.vel(k) + a] = -10.0;
            upper[l.vel(k) + a] = 10.0;
        }
    }
    for k in 0..l.n_s {
        for i in 0..NUM_LEGS {
            for j in 0..3 {
                lower[l.q(k) + 3 * i + j] = morph.joint_limits[j][0];
                upper[l.q(k) + 3 * i + j] = morph.joint_limits[j][1];
            }
            // Unilateral normal force; generous lateral caps.
            lower[l.u(k) + 3 * i] = -400.0;
            upper[l.u(k) + 3 * i] = 400.0;
            lower[l.u(k) + 3 * i + 1] = -400.0;
            upper[l.u(k) + 3 * i + 1] = 400.0;
            lower[l.u(k) + 3 * i + 2] = 0.0;
            upper[l.u(k) + 3 * i + 2] = 400.0;
        }
    }
    lower[l.t_stance()] = 0.1;
    upper[l.t_stance()] = 1.5;
    lower[l.t_flight()] = 0.1;
    upper[l.t_flight()] = 1.5;
    for a in 0..3 {
        lower[l.xi() + a] = -1.0;
        upper[l.xi() + a] = 1.0;
    }

    let constraints: Vec<Box<dyn Constraint>> = vec![
        Box::new(InitialState { data: data.clone() }),
        Box::new(StanceDynamics { data: data.clone() }),
        Box::new(TakeoffContinuity { data: data.clone() }),
        Box::new(FlightDynamics { data: data.clone() }),
        Box::new(LandingTarget { data: data.clone() }),
        Box::new(Kinematics { data: data.clone() }),
        Box::new(GrfDistribution { data: data.clone() }),
        Box::new(FrictionPyramid { data: data.clone() }),
        Box::new(TorqueLimit { data: data.clone() }),
    ];

    let problem = NlpProblem {
        n_vars: n,
        objective: Box::new(JumpCost::new(data.clone(), cfg.weights)),
        constraints,
        lower,
        upper,
    };
    Ok((problem, data))
}

/// Initial guess: linear CoM interpolation with a parabolic z bump, homing
/// joints, equal static force split, t = (0.6, 0.4) s.
pub fn build_initial_guess(data: &ProblemData) -> Vec<f64> {
    let l = data.layout;
    let mut x = vec![0.0; l.n_vars()];
    let (t_s, t_f) = (T_STANCE_INIT, T_FLIGHT_INIT);
    x[l.t_stance()] = t_s;
    x[l.t_flight()] = t_f;

    let n = l.n_knots();
    let dt_s = t_s / (l.n_s as f64 - 1.0);
    let dt_f = t_f / (l.n_f as f64 - 1.0);
    // Time of each knot along the plan (take-off knot duplicated).
    let time_of = |k: usize| -> f64 {
        if k < l.n_s {
            k as f64 * dt_s
        } else {
            t_s + (k - l.n_s + 1) as f64 * dt_f
        }
    };
    let total = t_s + t_f;
    let bump = 0.1;
    let pos_of = |k: usize| -> Vector3<f64> {
        let s = time_of(k) / total;
        let mut p = data.r_start + (data.r_target - data.r_start) * s;
        p.z += bump * 4.0 * s * (1.0 - s);
        p
    };
    for k in 0..n {
        let p = pos_of(k);
        let v = if k + 1 < n {
            let dt = (time_of(k + 1) - time_of(k)).max(1e-9);
            (pos_of(k + 1) - p) / dt
        } else {
            Vector3::zeros()
        };
        for a in 0..3 {
            x[l.pos(k) + a] = p[a];
            x[l.vel(k) + a] = v[a];
        }
    }
    let static_fz = data.morph.mass * (-data.gravity.z) / NUM_LEGS as f64;
    for k in 0..l.n_s {
        for i in 0..NUM_LEGS {
            for j in 0..3 {
                x[l.q(k) + 3 * i + j] = data.q_home[3 * i + j];
            }
            x[l.u(k) + 3 * i + 2] = static_fz;
        }
    }
    x
}
