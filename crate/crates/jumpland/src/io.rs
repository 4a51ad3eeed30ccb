//! File formats: the trajectory CSV written by the planner and read back by
//! the rollout command, and the per-step rollout log CSV. All floats are
//! printed with the shortest round-trip representation, so a write/read
//! cycle is lossless.

use nalgebra::Vector3;
use thiserror::Error;

use crate::jump::TrajectoryKnots;
use crate::morphology::{NUM_JOINTS, NUM_LEGS};
use crate::reference::{Phase, ReferenceMotion, ReferenceSample};
use crate::rewards::RewardBreakdown;
use crate::sim::RolloutStep;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {what}")]
    Parse { line: usize, what: String },
}

fn parse_err(line: usize, what: impl Into<String>) -> IoError {
    IoError::Parse { line, what: what.into() }
}

/// One trajectory CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub time_s: f64,
    pub phase: Phase,
    pub r: Vector3<f64>,
    pub rdot: Vector3<f64>,
    pub q: [f64; NUM_JOINTS],
    /// Contact forces flattened per leg; absent outside stance.
    pub f: Option<[f64; NUM_JOINTS]>,
}

pub const TRAJECTORY_HEADER: &str = "time_s,phase,r_x,r_y,r_z,rdot_x,rdot_y,rdot_z,\
q_0,q_1,q_2,q_3,q_4,q_5,q_6,q_7,q_8,q_9,q_10,q_11,\
f_0,f_1,f_2,f_3,f_4,f_5,f_6,f_7,f_8,f_9,f_10,f_11";

/// Render the solved knots (plus the flight joint reference) as CSV.
/// The config hash and seed are embedded as a comment line.
pub fn write_trajectory_csv(
    knots: &TrajectoryKnots,
    flight_joints: &[[f64; NUM_JOINTS]],
    config_hash: &str,
    seed: u64,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={config_hash} seed={seed}\n"));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    let dt_s = knots.dt_stance();
    let dt_f = knots.dt_flight();
    for i in 0..knots.n_s {
        let s = &knots.states[i];
        let mut f = [0.0; NUM_JOINTS];
        for leg in 0..NUM_LEGS {
            for k in 0..3 {
                f[3 * leg + k] = knots.forces[i][leg][k];
            }
        }
        push_row(&mut out, i as f64 * dt_s, Phase::Stance, s.r, s.r_dot, &knots.joints[i], Some(&f));
    }
    for k in 0..knots.n_f {
        let s = &knots.states[knots.n_s + k];
        push_row(
            &mut out,
            knots.t_stance + k as f64 * dt_f,
            Phase::Flight,
            s.r,
            s.r_dot,
            &flight_joints[k],
            None,
        );
    }
    out
}

fn push_row(
    out: &mut String,
    time: f64,
    phase: Phase,
    r: Vector3<f64>,
    rdot: Vector3<f64>,
    q: &[f64; NUM_JOINTS],
    f: Option<&[f64; NUM_JOINTS]>,
) {
    out.push_str(&format!("{},{}", time, phase.as_str()));
    for v in [r.x, r.y, r.z, rdot.x, rdot.y, rdot.z] {
        out.push_str(&format!(",{v}"));
    }
    for v in q {
        out.push_str(&format!(",{v}"));
    }
    match f {
        Some(f) => {
            for v in f {
                out.push_str(&format!(",{v}"));
            }
        }
        None => out.push_str(&",".repeat(NUM_JOINTS)),
    }
    out.push('\n');
}

/// Parse a trajectory CSV, reporting the 1-based line number on errors.
pub fn read_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>, IoError> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != TRAJECTORY_HEADER {
                return Err(parse_err(line_no, "missing or malformed header row"));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 32 {
            return Err(parse_err(line_no, format!("expected 32 fields, got {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64, IoError> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("bad number {:?} in column {i}", fields[i])))
        };
        let phase = match fields[1] {
            "stance" => Phase::Stance,
            "flight" => Phase::Flight,
            other => return Err(parse_err(line_no, format!("unknown phase {other:?}"))),
        };
        let mut q = [0.0; NUM_JOINTS];
        for j in 0..NUM_JOINTS {
            q[j] = num(8 + j)?;
        }
        let f = if fields[20..32].iter().all(|s| s.is_empty()) {
            None
        } else {
            let mut f = [0.0; NUM_JOINTS];
            for j in 0..NUM_JOINTS {
                f[j] = num(20 + j)?;
            }
            Some(f)
        };
        rows.push(TrajectoryRow {
            time_s: num(0)?,
            phase,
            r: Vector3::new(num(2)?, num(3)?, num(4)?),
            rdot: Vector3::new(num(5)?, num(6)?, num(7)?),
            q,
            f,
        });
    }
    if !saw_header {
        return Err(parse_err(1, "empty file"));
    }
    if rows.is_empty() {
        return Err(parse_err(2, "no data rows"));
    }
    Ok(rows)
}

/// Rebuild a policy-rate reference motion from parsed trajectory rows by
/// linear interpolation, mirroring the planner-side resampling timeline.
pub fn rows_to_motion(
    rows: &[TrajectoryRow],
    dt: f64,
    pre_trigger: f64,
    post_landing: f64,
) -> Result<ReferenceMotion, IoError> {
    let stance: Vec<&TrajectoryRow> = rows.iter().filter(|r| r.phase == Phase::Stance).collect();
    let flight: Vec<&TrajectoryRow> = rows.iter().filter(|r| r.phase == Phase::Flight).collect();
    if stance.len() < 2 || flight.len() < 2 {
        return Err(parse_err(0, "need at least two stance and two flight rows"));
    }
    let t_stance = stance.last().unwrap().time_s;
    let t_end = flight.last().unwrap().time_s;
    let t_flight = t_end - t_stance;
    if t_stance <= 0.0 || t_flight <= 0.0 {
        return Err(parse_err(0, "non-increasing phase times"));
    }

    let trigger_step = (pre_trigger / dt).round() as usize;
    let takeoff_step = trigger_step + (t_stance / dt).round() as usize;
    let touchdown_step = trigger_step + (t_end / dt).round() as usize;
    let total_steps = ((pre_trigger + t_end + post_landing) / dt).round() as usize;

    let interp = |group: &[&TrajectoryRow], tau: f64| -> (Vector3<f64>, [f64; NUM_JOINTS]) {
        let last = group.len() - 1;
        let tau = tau.clamp(group[0].time_s, group[last].time_s);
        let mut k = group.partition_point(|r| r.time_s <= tau).saturating_sub(1);
        k = k.min(last - 1);
        let (a, b) = (group[k], group[k + 1]);
        let span = (b.time_s - a.time_s).max(1e-12);
        let w = ((tau - a.time_s) / span).clamp(0.0, 1.0);
        let r = a.r + w * (b.r - a.r);
        let mut q = [0.0; NUM_JOINTS];
        for j in 0..NUM_JOINTS {
            q[j] = a.q[j] + w * (b.q[j] - a.q[j]);
        }
        (r, q)
    };

    let mut samples = Vec::with_capacity(total_steps);
    for step in 0..total_steps {
        let phase = if step < trigger_step {
            Phase::PreTrigger
        } else if step < takeoff_step {
            Phase::Stance
        } else if step < touchdown_step {
            Phase::Flight
        } else {
            Phase::Landing
        };
        let (r, q) = match phase {
            Phase::PreTrigger => (stance[0].r, stance[0].q),
            Phase::Stance => interp(&stance, (step - trigger_step) as f64 * dt),
            Phase::Flight => interp(&flight, (step - trigger_step) as f64 * dt),
            Phase::Landing => (flight.last().unwrap().r, flight.last().unwrap().q),
        };
        samples.push(ReferenceSample {
            base_position: r,
            base_orientation: nalgebra::UnitQuaternion::identity(),
            joint_positions: q,
            phase,
        });
    }
    Ok(ReferenceMotion { dt, samples, trigger_step, takeoff_step, touchdown_step })
}

pub const ROLLOUT_HEADER: &str = "time_s,phase,base_x,base_y,base_z,quat_w,quat_x,quat_y,quat_z,\
vel_x,vel_y,vel_z,ang_vel_x,ang_vel_y,ang_vel_z,\
q_0,q_1,q_2,q_3,q_4,q_5,q_6,q_7,q_8,q_9,q_10,q_11,\
tau_0,tau_1,tau_2,tau_3,tau_4,tau_5,tau_6,tau_7,tau_8,tau_9,tau_10,tau_11,\
contact_0,contact_1,contact_2,contact_3,\
r_base_pos,r_base_rot,r_joint,r_action_rate,r_smooth,r_energy,r_torque,r_base_collision,r_total";

/// Per-step rollout log: base state, joint state, torques, contact flags and
/// reward terms.
pub fn write_rollout_log(
    steps: &[RolloutStep],
    rewards: &[RewardBreakdown],
    motion: &ReferenceMotion,
    config_hash: &str,
    seed: u64,
) -> String {
    assert_eq!(steps.len(), rewards.len());
    let mut out = String::new();
    out.push_str(&format!("# config_hash={config_hash} seed={seed}\n"));
    out.push_str(ROLLOUT_HEADER);
    out.push('\n');
    for (i, (step, rew)) in steps.iter().zip(rewards).enumerate() {
        let s = &step.state;
        let phase = motion.samples[i.min(motion.len() - 1)].phase;
        out.push_str(&format!("{},{}", s.time, phase.as_str()));
        let quat = s.base_orientation.coords;
        for v in [
            s.base_position.x,
            s.base_position.y,
            s.base_position.z,
            quat.w,
            quat.x,
            quat.y,
            quat.z,
            s.base_lin_vel.x,
            s.base_lin_vel.y,
            s.base_lin_vel.z,
            s.base_ang_vel.x,
            s.base_ang_vel.y,
            s.base_ang_vel.z,
        ] {
            out.push_str(&format!(",{v}"));
        }
        for v in &s.joint_positions {
            out.push_str(&format!(",{v}"));
        }
        for v in &step.torques {
            out.push_str(&format!(",{v}"));
        }
        for leg in 0..NUM_LEGS {
            out.push_str(if step.contact_forces[leg].norm() > 0.0 { ",1" } else { ",0" });
        }
        for v in rew.terms() {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", rew.total));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::{reshape_flight_joints, solve_jump, JumpCommand, ToConfig};
    use crate::morphology::RobotMorphology;

    fn small_plan() -> (TrajectoryKnots, Vec<[f64; NUM_JOINTS]>) {
        let morph = RobotMorphology::default();
        let cfg = ToConfig { n_s: 10, n_f: 10, ..ToConfig::default() };
        let cmd = JumpCommand::displacement(0.3, 0.0, 0.0);
        let knots = solve_jump(&cmd, &morph, &cfg).expect("plan");
        let flight = reshape_flight_joints(&knots, &cmd, &morph, 4).expect("reshape");
        (knots, flight)
    }

    #[test]
    fn round_trip_is_lossless() {
        let (knots, flight) = small_plan();
        let text = write_trajectory_csv(&knots, &flight, "cafebabe", 3);
        assert!(text.starts_with("# config_hash=cafebabe seed=3\n"));
        let rows = read_trajectory_csv(&text).unwrap();
        assert_eq!(rows.len(), knots.n_s + knots.n_f);
        for (i, row) in rows.iter().take(knots.n_s).enumerate() {
            assert_eq!(row.phase, Phase::Stance);
            assert_eq!(row.r, knots.states[i].r);
            assert_eq!(row.rdot, knots.states[i].r_dot);
            assert_eq!(row.q, knots.joints[i]);
            let f = row.f.expect("stance rows carry forces");
            for leg in 0..NUM_LEGS {
                for k in 0..3 {
                    assert_eq!(f[3 * leg + k], knots.forces[i][leg][k]);
                }
            }
        }
        for (k, row) in rows.iter().skip(knots.n_s).enumerate() {
            assert_eq!(row.phase, Phase::Flight);
            assert_eq!(row.r, knots.states[knots.n_s + k].r);
            assert!(row.f.is_none());
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        let (knots, flight) = small_plan();
        let mut text = write_trajectory_csv(&knots, &flight, "h", 0);
        text.push_str("0.5,stance,oops\n");
        let bad_line = text.lines().count();
        match read_trajectory_csv(&text) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, bad_line),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(read_trajectory_csv("").is_err());
        assert!(read_trajectory_csv("time_s,phase\n").is_err());
    }

    #[test]
    fn rows_rebuild_a_consistent_motion() {
        let (knots, flight) = small_plan();
        let text = write_trajectory_csv(&knots, &flight, "h", 0);
        let rows = read_trajectory_csv(&text).unwrap();
        let motion = rows_to_motion(&rows, 0.02, 0.5, 1.5).unwrap();
        assert_eq!(motion.samples[0].phase, Phase::PreTrigger);
        assert_eq!(motion.samples[motion.len() - 1].phase, Phase::Landing);
        assert_eq!(motion.trigger_step, 25);
        // Flight window duration matches the plan to one sample.
        let planned = (knots.t_flight / 0.02).round() as usize;
        let actual = motion.touchdown_step - motion.takeoff_step;
        assert!((planned as i64 - actual as i64).abs() <= 1);
        // Landing hold matches the final flight configuration.
        let last = motion.samples.last().unwrap();
        assert_eq!(last.joint_positions, *flight.last().unwrap());
    }
}
