//! Flight and landing joint references realizing the landing feet polygon.

use super::{JumpCommand, JumpError, TrajectoryKnots};
use crate::morphology::{leg_fk, leg_ik, RobotMorphology, NUM_JOINTS, NUM_LEGS};

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Joint reference over flight plus `hold` post-touch-down samples: the
/// take-off joints blend (smoothstep) into the IK solution of the landing
/// polygon (homing polygon plus the command's offsets) at homing height,
/// which is then held.
pub fn reshape_flight_joints(
    knots: &TrajectoryKnots,
    cmd: &JumpCommand,
    morph: &RobotMorphology,
    hold: usize,
) -> Result<Vec<[f64; NUM_JOINTS]>, JumpError> {
    let takeoff_q = *knots.joints.last().expect("stance knots present");

    let mut landing_q = [0.0; NUM_JOINTS];
    for i in 0..NUM_LEGS {
        let target = leg_fk(morph.homing_angles(), i, morph) + cmd.landing_polygon_offsets[i];
        let q = leg_ik(target, i, morph)?;
        landing_q[3 * i..3 * i + 3].copy_from_slice(&q.as_array());
    }

    let n_f = knots.n_f;
    let mut out = Vec::with_capacity(n_f + hold);
    for j in 0..n_f {
        let s = smoothstep(j as f64 / (n_f as f64 - 1.0));
        let mut q = [0.0; NUM_JOINTS];
        for c in 0..NUM_JOINTS {
            q[c] = takeoff_q[c] + s * (landing_q[c] - takeoff_q[c]);
        }
        out.push(q);
    }
    for _ in 0..hold {
        out.push(landing_q);
    }
    Ok(out)
}
