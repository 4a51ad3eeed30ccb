//! Gradient verification and an independent KKT residual evaluator.

use super::{ConstraintKind, KktResiduals, NlpProblem};

/// Worst relative gradient errors found by central differencing.
#[derive(Debug, Clone)]
pub struct GradientReport {
    pub objective_error: f64,
    /// (block name, worst relative Jacobian entry error).
    pub constraint_errors: Vec<(String, f64)>,
}

impl GradientReport {
    pub fn max_error(&self) -> f64 {
        self.constraint_errors
            .iter()
            .map(|(_, e)| *e)
            .fold(self.objective_error, f64::max)
    }
}

fn rel_err(analytic: f64, numeric: f64, scale: f64) -> f64 {
    (analytic - numeric).abs() / scale.max(1.0)
}

/// Compare analytic gradients/Jacobians to central differences with the
/// given step. `x` should be in the interior of the bounds; the evaluation
/// itself does not clamp.
pub fn check_gradients(problem: &NlpProblem, x: &[f64], step: f64) -> GradientReport {
    let n = problem.n_vars;
    let mut xp = x.to_vec();

    // Objective gradient.
    let mut grad = vec![0.0; n];
    problem.objective.gradient(x, &mut grad);
    let mut objective_error: f64 = 0.0;
    for i in 0..n {
        xp[i] = x[i] + step;
        let fp = problem.objective.value(&xp);
        xp[i] = x[i] - step;
        let fm = problem.objective.value(&xp);
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * step);
        objective_error = objective_error.max(rel_err(grad[i], fd, fd.abs()));
    }

    // Constraint Jacobians, block by block, against dense differencing.
    let mut constraint_errors = Vec::new();
    for block in &problem.constraints {
        let m = block.dim();
        let mut jac = vec![0.0; m * n];
        block.jacobian(x, &mut |row, col, val| {
            jac[row * n + col] += val;
        });
        let mut cp = vec![0.0; m];
        let mut cm = vec![0.0; m];
        let mut worst: f64 = 0.0;
        for i in 0..n {
            xp[i] = x[i] + step;
            block.eval(&xp, &mut cp);
            xp[i] = x[i] - step;
            block.eval(&xp, &mut cm);
            xp[i] = x[i];
            for row in 0..m {
                let fd = (cp[row] - cm[row]) / (2.0 * step);
                worst = worst.max(rel_err(jac[row * n + i], fd, fd.abs()));
            }
        }
        constraint_errors.push((block.name().to_string(), worst));
    }

    GradientReport { objective_error, constraint_errors }
}

/// Recompute KKT residuals from scratch for a candidate point and multiplier
/// set. This is deliberately a separate code path from the solver's internal
/// bookkeeping so converged solutions can be cross-checked.
pub fn kkt_residuals(problem: &NlpProblem, x: &[f64], multipliers: &[Vec<f64>]) -> KktResiduals {
    let n = problem.n_vars;
    let mut grad_l = vec![0.0; n];
    problem.objective.gradient(x, &mut grad_l);

    let mut feasibility: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for (bi, block) in problem.constraints.iter().enumerate() {
        let m = block.dim();
        let mut c = vec![0.0; m];
        block.eval(x, &mut c);
        let lam = &multipliers[bi];
        match block.kind() {
            ConstraintKind::Equality => {
                for &v in &c {
                    feasibility = feasibility.max(v.abs());
                }
            }
            ConstraintKind::Inequality => {
                for i in 0..m {
                    feasibility = feasibility.max(c[i].max(0.0));
                    complementarity = complementarity.max((lam[i] * c[i]).abs());
                }
            }
        }
        let grad = &mut grad_l;
        block.jacobian(x, &mut |row, col, val| {
            grad[col] += lam[row] * val;
        });
    }

    // Projected stationarity honoring the box bounds.
    let mut stationarity: f64 = 0.0;
    for i in 0..n {
        let stepped = (x[i] - grad_l[i]).clamp(problem.lower[i], problem.upper[i]);
        stationarity = stationarity.max((x[i] - stepped).abs());
    }

    KktResiduals { stationarity, feasibility, complementarity }
}
