//! Quadruped morphology and per-leg kinematics.
//!
//! Each leg is a 3-DOF chain: hip roll about the body x axis followed by a
//! planar two-link (thigh, calf) chain in the leg's sagittal plane. The zero
//! configuration points the leg straight down; positive thigh pitch swings
//! the foot forward.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Leg indices follow the sign pattern of the hip positions:
/// 0 = FL (+x,+y), 1 = FR (+x,-y), 2 = HL (-x,+y), 3 = HR (-x,-y).
pub const NUM_LEGS: usize = 4;
pub const JOINTS_PER_LEG: usize = 3;
pub const NUM_JOINTS: usize = NUM_LEGS * JOINTS_PER_LEG;

pub const LEG_NAMES: [&str; NUM_LEGS] = ["FL", "FR", "HL", "HR"];

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("target at distance {dist:.4} m from hip is outside leg workspace [{min:.4}, {max:.4}] m")]
    OutOfReach { dist: f64, min: f64, max: f64 },
}

/// Joint angles of one leg, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LegJointAngles {
    pub hip_roll: f64,
    pub thigh_pitch: f64,
    pub calf_pitch: f64,
}

impl LegJointAngles {
    pub fn new(hip_roll: f64, thigh_pitch: f64, calf_pitch: f64) -> Self {
        Self { hip_roll, thigh_pitch, calf_pitch }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.hip_roll, self.thigh_pitch, self.calf_pitch]
    }

    pub fn from_slice(q: &[f64]) -> Self {
        Self::new(q[0], q[1], q[2])
    }
}

/// Geometric and inertial description of the quadruped.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotMorphology {
    /// Total mass in kg (lumped at the base).
    pub mass: f64,
    /// Diagonal of the body inertia tensor, kg m^2.
    pub body_inertia_diag: [f64; 3],
    /// Hip positions in the body frame, m. Order FL, FR, HL, HR.
    pub hip_positions: [[f64; 3]; NUM_LEGS],
    pub thigh_length: f64,
    pub calf_length: f64,
    /// Per-joint torque limit, N m.
    pub torque_limit: f64,
    /// (lower, upper) joint limits per leg joint: hip roll, thigh pitch, calf pitch.
    pub joint_limits: [[f64; 2]; JOINTS_PER_LEG],
    /// Homing joint angles, identical for all legs.
    pub homing_joint_angles: [f64; JOINTS_PER_LEG],
    /// Base height above ground at the homing pose, m.
    pub homing_height: f64,
}

impl Default for RobotMorphology {
    fn default() -> Self {
        Self {
            mass: 12.0,
            body_inertia_diag: [0.02, 0.06, 0.07],
            hip_positions: [
                [0.181, 0.131, 0.0],
                [0.181, -0.131, 0.0],
                [-0.181, 0.131, 0.0],
                [-0.181, -0.131, 0.0],
            ],
            thigh_length: 0.2,
            calf_length: 0.2,
            torque_limit: 33.5,
            joint_limits: [[-0.8, 0.8], [-1.0, 3.9], [-2.7, -0.9]],
            homing_joint_angles: [0.0, 0.896, -1.791],
            homing_height: 0.25,
        }
    }
}

impl RobotMorphology {
    pub fn hip(&self, leg: usize) -> Vector3<f64> {
        Vector3::from(self.hip_positions[leg])
    }

    pub fn homing_angles(&self) -> LegJointAngles {
        LegJointAngles::from_slice(&self.homing_joint_angles)
    }

    /// All 12 joints at homing, leg-major order.
    pub fn homing_joint_vector(&self) -> [f64; NUM_JOINTS] {
        let mut q = [0.0; NUM_JOINTS];
        for leg in 0..NUM_LEGS {
            q[3 * leg..3 * leg + 3].copy_from_slice(&self.homing_joint_angles);
        }
        q
    }

    /// Foot positions in the body frame at the homing pose.
    pub fn homing_feet(&self) -> [Vector3<f64>; NUM_LEGS] {
        core::array::from_fn(|leg| leg_fk(self.homing_angles(), leg, self))
    }

    pub fn body_inertia(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.body_inertia_diag))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.mass <= 0.0 || self.thigh_length <= 0.0 || self.calf_length <= 0.0 {
            return Err("mass and link lengths must be positive".into());
        }
        if self.torque_limit <= 0.0 {
            return Err("torque_limit must be positive".into());
        }
        for [lo, hi] in &self.joint_limits {
            if lo > hi {
                return Err("joint limit lower bound exceeds upper bound".into());
            }
        }
        let signs = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        for (leg, s) in signs.iter().enumerate() {
            let h = self.hip_positions[leg];
            if h[0] * s[0] <= 0.0 || h[1] * s[1] <= 0.0 {
                return Err(format!("hip {} violates the FL/FR/HL/HR sign pattern", LEG_NAMES[leg]));
            }
        }
        // Homing angles must realize the homing height through FK.
        let foot = leg_fk(self.homing_angles(), 0, self);
        let drop = foot.z - self.hip_positions[0][2];
        if (drop + self.homing_height).abs() > 1e-3 {
            return Err(format!(
                "FK of homing angles gives foot drop {:.4} m, expected {:.4} m",
                -drop, self.homing_height
            ));
        }
        Ok(())
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// d/da of `rot_x(a)`.
fn rot_x_d(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

/// d^2/da^2 of `rot_x(a)`.
fn rot_x_dd(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -c, s, 0.0, -s, -c)
}

/// Planar chain position in the leg sagittal plane (x forward, z down-negative).
fn chain(q: LegJointAngles, m: &RobotMorphology) -> Vector3<f64> {
    let (l1, l2) = (m.thigh_length, m.calf_length);
    let b = q.thigh_pitch;
    let bc = q.thigh_pitch + q.calf_pitch;
    Vector3::new(l1 * b.sin() + l2 * bc.sin(), 0.0, -l1 * b.cos() - l2 * bc.cos())
}

fn chain_d_thigh(q: LegJointAngles, m: &RobotMorphology) -> Vector3<f64> {
    let (l1, l2) = (m.thigh_length, m.calf_length);
    let b = q.thigh_pitch;
    let bc = q.thigh_pitch + q.calf_pitch;
    Vector3::new(l1 * b.cos() + l2 * bc.cos(), 0.0, l1 * b.sin() + l2 * bc.sin())
}

fn chain_d_calf(q: LegJointAngles, m: &RobotMorphology) -> Vector3<f64> {
    let l2 = m.calf_length;
    let bc = q.thigh_pitch + q.calf_pitch;
    Vector3::new(l2 * bc.cos(), 0.0, l2 * bc.sin())
}

/// Foot position in the body frame.
pub fn leg_fk(q: LegJointAngles, leg: usize, m: &RobotMorphology) -> Vector3<f64> {
    debug_assert!(leg < NUM_LEGS);
    m.hip(leg) + rot_x(q.hip_roll) * chain(q, m)
}

/// 3x3 contact Jacobian d(foot)/d(hip_roll, thigh_pitch, calf_pitch).
pub fn leg_jacobian(q: LegJointAngles, _leg: usize, m: &RobotMorphology) -> Matrix3<f64> {
    let r = rot_x(q.hip_roll);
    let col0 = rot_x_d(q.hip_roll) * chain(q, m);
    let col1 = r * chain_d_thigh(q, m);
    let col2 = r * chain_d_calf(q, m);
    Matrix3::from_columns(&[col0, col1, col2])
}

/// Second derivatives of the foot position: `H[j]` is d(Jacobian column j)/dq,
/// i.e. `H[j].column(k) = d^2 p / (dq_j dq_k)`. Symmetric in (j, k).
pub fn leg_fk_hessian(q: LegJointAngles, _leg: usize, m: &RobotMorphology) -> [Matrix3<f64>; 3] {
    let r = rot_x(q.hip_roll);
    let rd = rot_x_d(q.hip_roll);
    let c = chain(q, m);
    let cb = chain_d_thigh(q, m);
    let cg = chain_d_calf(q, m);
    // Planar second derivatives.
    let (l1, l2) = (m.thigh_length, m.calf_length);
    let b = q.thigh_pitch;
    let bc = q.thigh_pitch + q.calf_pitch;
    let cbb = Vector3::new(-l1 * b.sin() - l2 * bc.sin(), 0.0, l1 * b.cos() + l2 * bc.cos());
    let cbg = Vector3::new(-l2 * bc.sin(), 0.0, l2 * bc.cos());

    let h_aa = rot_x_dd(q.hip_roll) * c;
    let h_ab = rd * cb;
    let h_ag = rd * cg;
    let h_bb = r * cbb;
    let h_bg = r * cbg;
    let h_gg = r * cbg; // d^2 chain / dg^2 == d^2 chain / db dg

    [
        Matrix3::from_columns(&[h_aa, h_ab, h_ag]),
        Matrix3::from_columns(&[h_ab, h_bb, h_bg]),
        Matrix3::from_columns(&[h_ag, h_bg, h_gg]),
    ]
}

/// Inverse kinematics for one leg; selects the knee-backward branch
/// (calf pitch <= 0).
pub fn leg_ik(
    foot_pos_body: Vector3<f64>,
    leg: usize,
    m: &RobotMorphology,
) -> Result<LegJointAngles, KinematicsError> {
    let p = foot_pos_body - m.hip(leg);
    let (l1, l2) = (m.thigh_length, m.calf_length);
    let dist = p.norm();
    let (min_r, max_r) = ((l1 - l2).abs(), l1 + l2);
    if dist > max_r + 1e-12 || dist < min_r - 1e-12 {
        return Err(KinematicsError::OutOfReach { dist, min: min_r, max: max_r });
    }
    // Roll from the (y, z) projection; the chain lies at y = 0 before rolling.
    let hip_roll = if p.y.abs() < 1e-15 && p.z.abs() < 1e-15 {
        0.0
    } else {
        p.y.atan2(-p.z)
    };
    // Un-roll into the sagittal plane.
    let (s, c) = hip_roll.sin_cos();
    let x = p.x;
    let z = -p.y * s + p.z * c; // <= 0 for reachable down-pointing targets
    let l_sq = x * x + z * z;
    let cos_g = ((l_sq - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let calf_pitch = -cos_g.acos();
    let theta = x.atan2(-z);
    let thigh_pitch = theta - (l2 * calf_pitch.sin()).atan2(l1 + l2 * calf_pitch.cos());
    Ok(LegJointAngles::new(hip_roll, thigh_pitch, calf_pitch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn homing_q(m: &RobotMorphology) -> LegJointAngles {
        m.homing_angles()
    }

    #[test]
    fn fk_homing_realizes_homing_height() {
        let m = RobotMorphology::default();
        for leg in 0..NUM_LEGS {
            let foot = leg_fk(homing_q(&m), leg, &m);
            let drop = foot.z - m.hip_positions[leg][2];
            assert_relative_eq!(drop, -0.25, epsilon = 1e-3);
        }
        // Hand-trig value: -l1 cos(0.896) - l2 cos(0.896 - 1.791)
        let expected = -0.2 * 0.896f64.cos() - 0.2 * (0.896f64 - 1.791).cos();
        let foot = leg_fk(homing_q(&m), 0, &m);
        assert_relative_eq!(foot.z - m.hip_positions[0][2], expected, epsilon = 1e-12);
    }

    #[test]
    fn fk_zero_configuration_points_straight_down() {
        let m = RobotMorphology::default();
        let foot = leg_fk(LegJointAngles::default(), 1, &m);
        assert_relative_eq!(
            foot,
            m.hip(1) + Vector3::new(0.0, 0.0, -0.4),
            epsilon = 1e-12
        );
    }

    #[test]
    fn fk_horizontal_extension() {
        let m = RobotMorphology::default();
        let q = LegJointAngles::new(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        let foot = leg_fk(q, 2, &m);
        assert_relative_eq!(foot, m.hip(2) + Vector3::new(0.4, 0.0, 0.0), epsilon = 1e-12);
    }

    fn fd_jacobian(q: LegJointAngles, leg: usize, m: &RobotMorphology, h: f64) -> Matrix3<f64> {
        let mut j = Matrix3::zeros();
        for k in 0..3 {
            let mut qp = q.as_array();
            let mut qm = q.as_array();
            qp[k] += h;
            qm[k] -= h;
            let d = (leg_fk(LegJointAngles::from_slice(&qp), leg, m)
                - leg_fk(LegJointAngles::from_slice(&qm), leg, m))
                / (2.0 * h);
            j.set_column(k, &d);
        }
        j
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = RobotMorphology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let q = LegJointAngles::new(
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-1.0..3.9),
                rng.gen_range(-2.7..-0.9),
            );
            let leg = rng.gen_range(0..NUM_LEGS);
            let j = leg_jacobian(q, leg, &m);
            let j_fd = fd_jacobian(q, leg, &m, 1e-6);
            let rel = (j - j_fd).norm() / j.norm().max(1.0);
            assert!(rel < 1e-5, "relative error {rel} at {q:?}");
        }
    }

    #[test]
    fn jacobian_singular_at_straight_leg() {
        let m = RobotMorphology::default();
        let j = leg_jacobian(LegJointAngles::default(), 0, &m);
        assert!(j.determinant().abs() < 1e-12);
    }

    #[test]
    fn jacobian_transpose_maps_vertical_force_to_homing_torques() {
        let m = RobotMorphology::default();
        let q = homing_q(&m);
        let j = leg_jacobian(q, 0, &m);
        let f = Vector3::new(0.0, 0.0, -30.0);
        let tau = j.transpose() * f;
        // Cross-check every component against the finite-difference Jacobian.
        let tau_fd = fd_jacobian(q, 0, &m, 1e-6).transpose() * f;
        assert_relative_eq!(tau, tau_fd, epsilon = 1e-4);
        // Calf torque from the planar moment arm l2*sin(b+g) about the knee.
        let arm = m.calf_length * (q.thigh_pitch + q.calf_pitch).sin();
        assert_relative_eq!(tau.z, -30.0 * arm, epsilon = 1e-9);
    }

    #[test]
    fn hessian_matches_finite_differences_of_jacobian() {
        let m = RobotMorphology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let q = LegJointAngles::new(
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-1.0..3.9),
                rng.gen_range(-2.7..-0.9),
            );
            let h = leg_fk_hessian(q, 0, &m);
            let eps = 1e-6;
            for j in 0..3 {
                let mut qp = q.as_array();
                let mut qm = q.as_array();
                qp[j] += eps;
                qm[j] -= eps;
                let d = (leg_jacobian(LegJointAngles::from_slice(&qp), 0, &m)
                    - leg_jacobian(LegJointAngles::from_slice(&qm), 0, &m))
                    / (2.0 * eps);
                assert!((h[j] - d).norm() < 1e-5, "Hessian slice {j} mismatch at {q:?}");
            }
        }
    }

    #[test]
    fn ik_full_extension() {
        let m = RobotMorphology::default();
        let q = leg_ik(m.hip(3) + Vector3::new(0.0, 0.0, -0.4), 3, &m).unwrap();
        assert_relative_eq!(q.hip_roll, 0.0, epsilon = 1e-9);
        assert_relative_eq!(q.thigh_pitch, 0.0, epsilon = 1e-6);
        assert!(q.calf_pitch.abs() < 1e-6);
    }

    #[test]
    fn ik_recovers_homing_angles() {
        let m = RobotMorphology::default();
        for leg in 0..NUM_LEGS {
            let p = leg_fk(homing_q(&m), leg, &m);
            let q = leg_ik(p, leg, &m).unwrap();
            assert_relative_eq!(q.hip_roll, 0.0, epsilon = 1e-6);
            assert_relative_eq!(q.thigh_pitch, 0.896, epsilon = 1e-6);
            assert_relative_eq!(q.calf_pitch, -1.791, epsilon = 1e-6);
        }
    }

    #[test]
    fn ik_out_of_reach() {
        let m = RobotMorphology::default();
        let r = leg_ik(m.hip(0) + Vector3::new(0.0, 0.0, -0.5), 0, &m);
        assert!(matches!(r, Err(KinematicsError::OutOfReach { .. })));
    }

    #[test]
    fn fk_ik_round_trip_random_targets() {
        let m = RobotMorphology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 1000 {
            let q = LegJointAngles::new(
                rng.gen_range(-0.79..0.79),
                rng.gen_range(-0.9..3.8),
                rng.gen_range(-2.6..-1.0),
            );
            let leg = rng.gen_range(0..NUM_LEGS);
            let p = leg_fk(q, leg, &m);
            let q2 = leg_ik(p, leg, &m).unwrap();
            let p2 = leg_fk(q2, leg, &m);
            assert!((p - p2).norm() < 1e-9, "round trip error {} at {q:?}", (p - p2).norm());
            checked += 1;
        }
    }

    #[test]
    fn default_morphology_is_valid() {
        RobotMorphology::default().validate().unwrap();
    }

    #[test]
    fn hip_sign_pattern_enforced() {
        let mut m = RobotMorphology::default();
        m.hip_positions[1][1] = 0.131; // FR must have negative y
        assert!(m.validate().is_err());
    }
}
