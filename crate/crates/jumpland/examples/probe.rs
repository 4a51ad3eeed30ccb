use jumpland::jump::{build_initial_guess, build_problem, JumpCommand, ToConfig};
use jumpland::morphology::RobotMorphology;
use jumpland::nlp::{self, check_gradients, SolveOptions};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let do_check = args.iter().any(|a| a == "--check");

    let morph = RobotMorphology::default();
    let cfg = ToConfig { n_s: n, n_f: n, ..ToConfig::default() };
    let dy: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let dx: f64 = std::env::var("DX").ok().and_then(|s| s.parse().ok()).unwrap_or(0.3);
    let cmd = JumpCommand::displacement(dx, dy, 0.0);
    let (problem, data) = build_problem(&cmd, &morph, &cfg).unwrap();
    let mut x0 = build_initial_guess(&data);
    println!("n_vars = {}", problem.n_vars);

    if let Ok(v) = std::env::var("WARM") {
        let nc: usize = v.parse().unwrap();
        let coarse_cfg = ToConfig { n_s: nc, n_f: nc, ..ToConfig::default() };
        let (cp, cd) = build_problem(&cmd, &morph, &coarse_cfg).unwrap();
        let cx0 = build_initial_guess(&cd);
        let mut copts = SolveOptions::default();
        copts.max_inner = 100;
        let t0 = std::time::Instant::now();
        let csol = nlp::solve_traced(&cp, &cx0, &copts).0;
        println!("coarse status {:?} in {:.1}s", csol.status, t0.elapsed().as_secs_f64());
        let (lc, lf) = (cd.layout, data.layout);
        let cx = &csol.x_opt;
        let lerp = |arr: &dyn Fn(usize, usize) -> f64, k: f64, dim: usize, j: usize| -> f64 {
            let k0 = k.floor() as usize;
            let k1 = (k0 + 1).min(dim - 1);
            let t = k - k0 as f64;
            arr(k0, j) * (1.0 - t) + arr(k1, j) * t
        };
        for k in 0..lf.n_s {
            let s = k as f64 * (lc.n_s as f64 - 1.0) / (lf.n_s as f64 - 1.0);
            for j in 0..3 {
                x0[lf.pos(k) + j] = lerp(&|a, b| cx[lc.pos(a) + b], s, lc.n_s, j);
                x0[lf.vel(k) + j] = lerp(&|a, b| cx[lc.vel(a) + b], s, lc.n_s, j);
            }
            for j in 0..12 {
                x0[lf.q(k) + j] = lerp(&|a, b| cx[lc.q(a) + b], s, lc.n_s, j);
                x0[lf.u(k) + j] = lerp(&|a, b| cx[lc.u(a) + b], s, lc.n_s, j);
            }
        }
        for k in 0..lf.n_f {
            let s = k as f64 * (lc.n_f as f64 - 1.0) / (lf.n_f as f64 - 1.0);
            for j in 0..3 {
                x0[lf.pos(lf.n_s + k) + j] =
                    lerp(&|a, b| cx[lc.pos(lc.n_s + a) + b], s, lc.n_f, j);
                x0[lf.vel(lf.n_s + k) + j] =
                    lerp(&|a, b| cx[lc.vel(lc.n_s + a) + b], s, lc.n_f, j);
            }
        }
        x0[lf.t_stance()] = cx[lc.t_stance()];
        x0[lf.t_flight()] = cx[lc.t_flight()];
        for j in 0..3 {
            x0[lf.xi() + j] = cx[lc.xi() + j];
        }
    }

    if do_check {
        for (i, v) in x0.iter_mut().enumerate() {
            *v += 1e-3 * ((i as f64 * 0.7).sin());
        }
        let report = check_gradients(&problem, &x0, 1e-6);
        println!("objective grad err = {:.3e}", report.objective_error);
        for (name, err) in &report.constraint_errors {
            println!("  {name}: {err:.3e}");
        }
        return;
    }

    let mut options = SolveOptions::default();
    if let Ok(v) = std::env::var("CG_MAX") {
        options.cg_max = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("MAX_INNER") {
        options.max_inner = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("MAX_OUTER") {
        options.max_outer = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("INIT_RHO") {
        options.initial_penalty = v.parse().unwrap();
    }
    let t0 = std::time::Instant::now();
    let (sol, trace) = nlp::solve_traced(&problem, &x0, &options);
    for r in &trace {
        println!(
            "  outer {:2} obj {:10.4} feas {:.3e} stat {:.3e} rho {:.1e} merit {:.4} -> {:.4} inner {} conv {}",
            r.iter, r.objective, r.feasibility, r.stationarity, r.penalty, r.merit_start, r.merit_end,
            r.inner_iterations, r.inner_converged
        );
    }
    println!(
        "status {:?} in {:.1}s, {} outer iters, feas {:.3e}, stat {:.3e}, obj {:.4}",
        sol.status,
        t0.elapsed().as_secs_f64(),
        sol.iterations,
        sol.kkt.feasibility,
        sol.kkt.stationarity,
        sol.objective_value
    );
    // Per-block worst violation at the final point.
    for block in &problem.constraints {
        let mut out = vec![0.0; block.dim()];
        block.eval(&sol.x_opt, &mut out);
        let (mut worst, mut wi) = (0.0f64, 0usize);
        for (i, &c) in out.iter().enumerate() {
            if c.abs() > worst {
                worst = c.abs();
                wi = i;
            }
        }
        println!("  viol {} = {:.3e} at row {}", block.name(), worst, wi);
    }
    // Lagrangian gradient with the final multipliers: top offenders.
    let x = &sol.x_opt;
    let mut g = vec![0.0; problem.n_vars];
    problem.objective.gradient(x, &mut g);
    for (bi, block) in problem.constraints.iter().enumerate() {
        let lam = &sol.multipliers[bi];
        block.jacobian(x, &mut |row, col, val| {
            g[col] += lam[row] * val;
        });
        let norm = lam.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        println!("  |lambda|_inf {} = {:.3e}", block.name(), norm);
    }
    let mut idx: Vec<usize> = (0..problem.n_vars).collect();
    idx.sort_by(|&a, &b| {
        let pa = (x[a] - (x[a] - g[a]).clamp(problem.lower[a], problem.upper[a])).abs();
        let pb = (x[b] - (x[b] - g[b]).clamp(problem.lower[b], problem.upper[b])).abs();
        pb.partial_cmp(&pa).unwrap()
    });
    let l = data.layout;
    let name_of = |i: usize| -> String {
        if i < 6 * l.n_knots() {
            let k = i / 6;
            let c = i % 6;
            format!("{}[{k}].{}", if c < 3 { "pos" } else { "vel" }, ["x","y","z"][c % 3])
        } else if i < 6 * l.n_knots() + 12 * l.n_s {
            let j = i - 6 * l.n_knots();
            format!("q[{}][{}]", j / 12, j % 12)
        } else if i < l.t_stance() {
            let j = i - 6 * l.n_knots() - 12 * l.n_s;
            format!("u[{}][{}]", j / 12, j % 12)
        } else if i == l.t_stance() {
            "t_s".into()
        } else if i == l.t_flight() {
            "t_f".into()
        } else {
            format!("xi[{}]", i - l.xi())
        }
    };
    for &i in idx.iter().take(8) {
        let pg = (x[i] - (x[i] - g[i]).clamp(problem.lower[i], problem.upper[i])).abs();
        println!(
            "  grad {} = {:.3e} (pg {:.3e}) x = {:.4} in [{}, {}]",
            name_of(i), g[i], pg, x[i], problem.lower[i], problem.upper[i]
        );
    }
    for k in [0usize, l.n_s / 2, l.n_s - 2, l.n_s - 1] {
        let u = &sol.x_opt[l.u(k)..l.u(k) + 12];
        println!(
            "  u[{k}] FL ({:7.2},{:7.2},{:7.2}) FR ({:7.2},{:7.2},{:7.2}) HL ({:7.2},{:7.2},{:7.2}) HR ({:7.2},{:7.2},{:7.2})",
            u[0], u[1], u[2], u[3], u[4], u[5], u[6], u[7], u[8], u[9], u[10], u[11]
        );
    }
    println!(
        "t_s {:.3} t_f {:.3} xi ({:.2e},{:.2e},{:.2e}) v_to ({:.2},{:.2},{:.2})",
        sol.x_opt[l.t_stance()],
        sol.x_opt[l.t_flight()],
        sol.x_opt[l.xi()],
        sol.x_opt[l.xi() + 1],
        sol.x_opt[l.xi() + 2],
        sol.x_opt[l.vel(l.n_s - 1)],
        sol.x_opt[l.vel(l.n_s - 1) + 1],
        sol.x_opt[l.vel(l.n_s - 1) + 2],
    );
}
