//! Minimum-norm ground-reaction-force distribution over the feet polygon.
//!
//! With constant centroidal angular momentum the per-foot forces must sum to
//! the commanded net force while producing zero moment about the CoM. Among
//! the 12 unknowns satisfying these 6 equations we pick the minimum-norm
//! solution through the grasp-map pseudo-inverse.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use thiserror::Error;

use crate::morphology::NUM_LEGS;

pub type GraspMap = SMatrix<f64, 6, 12>;
/// Maps a net force to the stacked per-foot minimum-norm forces.
pub type DistributionMatrix = SMatrix<f64, 12, 3>;

#[derive(Debug, Error)]
pub enum GrfError {
    #[error("feet polygon is singular: grasp map lost row rank")]
    SingularPolygon,
}

fn skew(v: Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Grasp map G so that G u = [sum(f_i); sum((c_i - com) x f_i)].
pub fn grasp_map(com: Vector3<f64>, contacts: &[Vector3<f64>; NUM_LEGS]) -> GraspMap {
    let mut g = GraspMap::zeros();
    for (i, c) in contacts.iter().enumerate() {
        g.fixed_view_mut::<3, 3>(0, 3 * i).copy_from(&Matrix3::identity());
        g.fixed_view_mut::<3, 3>(3, 3 * i).copy_from(&skew(c - com));
    }
    g
}

fn gram_inverse(g: &GraspMap) -> Result<SMatrix<f64, 6, 6>, GrfError> {
    let m = g * g.transpose();
    // Row-rank loss shows up as a tiny determinant of the Gram matrix.
    if m.determinant().abs() < 1e-9 {
        return Err(GrfError::SingularPolygon);
    }
    m.try_inverse().ok_or(GrfError::SingularPolygon)
}

/// Minimum-norm distribution matrix D with u = D F for zero commanded moment.
pub fn distribution_matrix(
    com: Vector3<f64>,
    contacts: &[Vector3<f64>; NUM_LEGS],
) -> Result<DistributionMatrix, GrfError> {
    let g = grasp_map(com, contacts);
    let m_inv = gram_inverse(&g)?;
    // D = G' M^-1 E with E selecting the force rows.
    let gt_minv = g.transpose() * m_inv;
    Ok(gt_minv.fixed_view::<12, 3>(0, 0).into_owned())
}

/// Derivatives of the distribution matrix with respect to the CoM
/// coordinates: `out[j] = d D / d com_j`.
pub fn distribution_matrix_gradient(
    com: Vector3<f64>,
    contacts: &[Vector3<f64>; NUM_LEGS],
) -> Result<[DistributionMatrix; 3], GrfError> {
    let g = grasp_map(com, contacts);
    let m_inv = gram_inverse(&g)?;
    let e = SMatrix::<f64, 6, 3>::identity();
    let mut out = [DistributionMatrix::zeros(); 3];
    for j in 0..3 {
        let mut dg = GraspMap::zeros();
        let dskew = -skew(Vector3::ith(j, 1.0));
        for i in 0..NUM_LEGS {
            dg.fixed_view_mut::<3, 3>(3, 3 * i).copy_from(&dskew);
        }
        let dm = dg * g.transpose() + g * dg.transpose();
        let dm_inv = -m_inv * dm * m_inv;
        let dd = dg.transpose() * m_inv * e + g.transpose() * dm_inv * e;
        out[j] = dd;
    }
    Ok(out)
}

/// Distribute a net force over the four contacts: forces sum to
/// `total_force`, their moment about `com` vanishes, and the stacked force
/// vector has minimum norm among all such distributions.
pub fn distribute_grf(
    total_force: Vector3<f64>,
    com: Vector3<f64>,
    contacts: &[Vector3<f64>; NUM_LEGS],
) -> Result<[Vector3<f64>; NUM_LEGS], GrfError> {
    let d = distribution_matrix(com, contacts)?;
    let u: SVector<f64, 12> = d * total_force;
    Ok(core::array::from_fn(|i| Vector3::new(u[3 * i], u[3 * i + 1], u[3 * i + 2])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RobotMorphology;
    use approx::assert_relative_eq;
    use nalgebra::SVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn homing_contacts() -> [Vector3<f64>; 4] {
        let m = RobotMorphology::default();
        // Feet on the ground plane below the hips.
        core::array::from_fn(|i| {
            let hip = m.hip(i);
            Vector3::new(hip.x, hip.y, 0.0)
        })
    }

    /// Independent oracle: minimum-norm solution of G u = b via SVD
    /// pseudo-inverse of the full 6x12 grasp map.
    fn pinv_oracle(
        total: Vector3<f64>,
        com: Vector3<f64>,
        contacts: &[Vector3<f64>; 4],
    ) -> SVector<f64, 12> {
        let g = grasp_map(com, contacts);
        let b = SVector::<f64, 6>::from_iterator(
            total.iter().copied().chain([0.0, 0.0, 0.0]),
        );
        let svd = g.svd(true, true);
        svd.solve(&b, 1e-12).unwrap()
    }

    #[test]
    fn symmetric_polygon_splits_equally() {
        let contacts = homing_contacts();
        let com = Vector3::new(0.0, 0.0, 0.25);
        let f = distribute_grf(Vector3::new(0.0, 0.0, 117.7), com, &contacts).unwrap();
        for fi in &f {
            assert_relative_eq!(*fi, Vector3::new(0.0, 0.0, 117.7 / 4.0), epsilon = 1e-9);
        }
    }

    #[test]
    fn moment_residual_vanishes() {
        let contacts = homing_contacts();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let total = Vector3::new(
                rng.gen_range(-100.0..100.0),
                rng.gen_range(-100.0..100.0),
                rng.gen_range(0.0..300.0),
            );
            let com = Vector3::new(
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(0.15..0.35),
            );
            let f = distribute_grf(total, com, &contacts).unwrap();
            let mut moment = Vector3::zeros();
            let mut sum = Vector3::zeros();
            for (i, fi) in f.iter().enumerate() {
                moment += (contacts[i] - com).cross(fi);
                sum += fi;
            }
            assert!(moment.norm() < 1e-9, "moment residual {}", moment.norm());
            assert_relative_eq!(sum, total, epsilon = 1e-9);
        }
    }

    #[test]
    fn shifted_com_matches_pseudo_inverse_oracle() {
        let contacts = homing_contacts();
        let com = Vector3::new(0.05, 0.0, 0.25);
        let total = Vector3::new(0.0, 0.0, 117.7);
        let f = distribute_grf(total, com, &contacts).unwrap();
        let oracle = pinv_oracle(total, com, &contacts);
        for i in 0..4 {
            for k in 0..3 {
                assert_relative_eq!(f[i][k], oracle[3 * i + k], epsilon = 1e-9);
            }
        }
        // Shifting the CoM forward moves load to the front feet.
        assert!(f[0].z > f[2].z);
        assert!(f[1].z > f[3].z);
    }

    #[test]
    fn degenerate_polygon_is_singular() {
        // All feet at one point: no moment about the contact axis is
        // producible and the grasp map loses row rank.
        let contacts = [Vector3::zeros(); 4];
        let r = distribute_grf(Vector3::new(0.0, 0.0, 100.0), Vector3::z() * 0.25, &contacts);
        assert!(matches!(r, Err(GrfError::SingularPolygon)));

        // Collinear feet with the CoM on the same line: moments about that
        // line vanish for every force choice.
        let line = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.1, 0.0, 0.0),
            Vector3::new(0.2, 0.0, 0.0),
            Vector3::new(0.3, 0.0, 0.0),
        ];
        let r = distribute_grf(Vector3::new(0.0, 0.0, 100.0), Vector3::new(0.15, 0.0, 0.0), &line);
        assert!(matches!(r, Err(GrfError::SingularPolygon)));
    }

    #[test]
    fn distribution_gradient_matches_finite_differences() {
        let contacts = homing_contacts();
        let com = Vector3::new(0.03, -0.02, 0.27);
        let grad = distribution_matrix_gradient(com, &contacts).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut cp = com;
            let mut cm = com;
            cp[j] += h;
            cm[j] -= h;
            let fd = (distribution_matrix(cp, &contacts).unwrap()
                - distribution_matrix(cm, &contacts).unwrap())
                / (2.0 * h);
            assert!((grad[j] - fd).norm() < 1e-6, "component {j}");
        }
    }
}
