//! Penalty contact: spring-damper normal force plus a stick-slip tangential
//! spring with a Coulomb cap.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::terrain::Terrain;

/// Penalty contact parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactParams {
    /// Normal spring stiffness, N/m.
    pub kn: f64,
    /// Normal damping, N s/m.
    pub dn: f64,
    /// Tangential spring stiffness, N/m.
    pub kt: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { kn: 1e4, dn: 100.0, kt: 5e3 }
    }
}

/// Per-foot tangential anchor for the stick-slip spring. `None` while the
/// foot is airborne.
#[derive(Debug, Clone, Copy, Default)]
pub struct FootContact {
    pub anchor: Option<Vector2<f64>>,
}

impl FootContact {
    pub fn in_contact(&self) -> bool {
        self.anchor.is_some()
    }
}

/// World-frame contact force on one foot. The anchor state is updated in
/// place: set on touch-down, dragged along the surface when the Coulomb cap
/// saturates, and cleared on lift-off.
pub fn contact_force(
    foot_pos: Vector3<f64>,
    foot_vel: Vector3<f64>,
    terrain: &Terrain,
    params: &ContactParams,
    mu: f64,
    state: &mut FootContact,
) -> Vector3<f64> {
    let ground = terrain.height(foot_pos.x, foot_pos.y);
    let penetration = ground - foot_pos.z;
    if penetration <= 0.0 {
        state.anchor = None;
        return Vector3::zeros();
    }
    // Spring-damper normal force; damping only ever pushes, never pulls,
    // and the impact-damping spike is capped at the spring force so touch
    // down impulses stay bounded.
    let spring = params.kn * penetration;
    let fz = (spring - params.dn * foot_vel.z).clamp(0.0, 2.0 * spring);

    let p_t = Vector2::new(foot_pos.x, foot_pos.y);
    let anchor = *state.anchor.get_or_insert(p_t);
    let mut ft = -params.kt * (p_t - anchor);
    let cap = mu * fz;
    let mag = ft.norm();
    if mag > cap {
        ft *= cap / mag;
        // Slide the anchor so the spring sits exactly at the friction cap.
        state.anchor = Some(p_t + ft / params.kt);
    }
    Vector3::new(ft.x, ft.y, fz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn no_force_above_ground() {
        let t = Terrain::flat(0.6);
        let p = ContactParams::default();
        let mut s = FootContact::default();
        let f = contact_force(
            Vector3::new(0.0, 0.0, 0.01),
            Vector3::zeros(),
            &t,
            &p,
            0.6,
            &mut s,
        );
        assert_eq!(f, Vector3::zeros());
        assert!(!s.in_contact());
    }

    #[test]
    fn static_penetration_force() {
        let t = Terrain::flat(0.6);
        let p = ContactParams { kn: 1e4, dn: 100.0, kt: 5e3 };
        let mut s = FootContact::default();
        let f = contact_force(
            Vector3::new(0.0, 0.0, -0.001),
            Vector3::zeros(),
            &t,
            &p,
            0.6,
            &mut s,
        );
        assert_relative_eq!(f.z, 10.0, epsilon = 1e-12);
        assert!(s.in_contact());
    }

    #[test]
    fn tangential_clamped_to_coulomb_cap() {
        let t = Terrain::flat(0.6);
        let p = ContactParams { kn: 1e4, dn: 0.0, kt: 5e3 };
        let mut s = FootContact { anchor: Some(Vector2::new(-0.02, 0.0)) };
        // fz = 50 N; spring demand kt * 0.02 = 100 N, cap = 30 N.
        let f = contact_force(
            Vector3::new(0.0, 0.0, -0.005),
            Vector3::zeros(),
            &t,
            &p,
            0.6,
            &mut s,
        );
        assert_relative_eq!(f.z, 50.0, epsilon = 1e-12);
        assert_relative_eq!(f.xy().norm(), 30.0, epsilon = 1e-9);
        // The anchor slid so the spring force now equals the cap.
        let a = s.anchor.unwrap();
        assert_relative_eq!((5e3 * a.norm()), 30.0, epsilon = 1e-9);
    }

    #[test]
    fn liftoff_clears_anchor() {
        let t = Terrain::flat(0.6);
        let p = ContactParams::default();
        let mut s = FootContact { anchor: Some(Vector2::zeros()) };
        contact_force(Vector3::new(0.0, 0.0, 0.05), Vector3::zeros(), &t, &p, 0.6, &mut s);
        assert!(!s.in_contact());
    }

    #[test]
    fn normal_force_never_negative() {
        let t = Terrain::flat(0.6);
        let p = ContactParams::default();
        let mut s = FootContact::default();
        // Fast upward motion while barely penetrating: damping would pull.
        let f = contact_force(
            Vector3::new(0.0, 0.0, -1e-4),
            Vector3::new(0.0, 0.0, 1.0),
            &t,
            &p,
            0.6,
            &mut s,
        );
        assert_eq!(f.z, 0.0);
    }
}
