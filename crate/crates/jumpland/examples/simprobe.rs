use jumpland::jump::{reshape_flight_joints, solve_jump, JumpCommand, ToConfig};
use jumpland::morphology::RobotMorphology;
use jumpland::reference::resample;
use jumpland::sim::{rollout_pd, PdParams, SimParams, Terrain};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let kp: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300.0);
    let kd: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let dx: f64 = std::env::var("DX").ok().and_then(|s| s.parse().ok()).unwrap_or(0.3);
    let n: usize = std::env::var("N").ok().and_then(|s| s.parse().ok()).unwrap_or(12);

    let morph = RobotMorphology::default();
    let cfg = ToConfig { n_s: n, n_f: n, ..ToConfig::default() };
    let cmd = JumpCommand::displacement(dx, 0.0, 0.0);
    let knots = solve_jump(&cmd, &morph, &cfg).expect("plan");
    let flight = reshape_flight_joints(&knots, &cmd, &morph, 4).expect("reshape");
    let motion = resample(&knots, &flight, &morph, 0.02, 0.5, 1.5);
    println!("takeoff {} touchdown {} t_s {:.3} t_f {:.3} v_to ({:.2},{:.2},{:.2})",
        motion.takeoff_step, motion.touchdown_step, knots.t_stance, knots.t_flight,
        knots.takeoff_state().r_dot.x, knots.takeoff_state().r_dot.y, knots.takeoff_state().r_dot.z);

    let terrain = Terrain::flat(0.8);
    let params = SimParams::default();
    let pd = PdParams { kp, kd };
    match rollout_pd(&motion, &pd, &terrain, 0.8, &morph, &params) {
        Ok(log) => {
            let mut overlap = 0;
            for k in motion.takeoff_step..motion.touchdown_step {
                if log[k].state.foot_contact.iter().all(|&c| !c) { overlap += 1; }
            }
            let win = motion.touchdown_step - motion.takeoff_step;
            println!("overlap {}/{} = {:.2}", overlap, win, overlap as f64 / win as f64);
            for k in (motion.trigger_step.saturating_sub(2))..motion.len().min(motion.touchdown_step + 15) {
                let s = &log[k];
                let r = &motion.samples[k];
                println!("k {k:3} {:11} z {:6.3} ref_z {:6.3} x {:6.3} ref_x {:6.3} vz {:6.2} contacts {} q1 {:6.3} ref_q1 {:6.3} tau_max {:5.1}",
                    format!("{:?}", r.phase), s.state.base_position.z, r.base_position.z,
                    s.state.base_position.x, r.base_position.x,
                    s.state.base_lin_vel.z,
                    s.state.foot_contact.iter().filter(|&&c| c).count(),
                    s.state.joint_positions[1], r.joint_positions[1],
                    s.torques.iter().fold(0.0f64, |m, t| m.max(t.abs())));
            }
        }
        Err(e) => println!("diverged: {e}"),
    }
}
