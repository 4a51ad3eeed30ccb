//! Augmented Lagrangian solver with a projected truncated-Newton inner loop.
//!
//! Equality constraints enter the merit as lambda'c + rho/2 ||c||^2;
//! inequalities (c <= 0) through the positive-part form
//! (1/2rho) (max(0, lambda + rho c)^2 - lambda^2), which keeps the
//! multiplier estimates in the nonnegative cone without slack variables.
//! The inner Newton systems are solved by preconditioned conjugate
//! gradients; the preconditioner is a banded-plus-border Cholesky
//! factorization of the Gauss-Newton matrix (see [`super::precond`]).

use std::io::Write as _;
use std::path::PathBuf;

use super::precond::{Factor, SparsityPlan};
use super::{ConstraintKind, KktResiduals, NlpProblem, NlpSolution, SolveStatus};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub feasibility_tol: f64,
    pub stationarity_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    /// Cap on conjugate-gradient iterations per Newton step.
    pub cg_max: usize,
    /// Optional line-per-outer-iteration CSV diagnostic trace.
    pub trace_path: Option<PathBuf>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-6,
            stationarity_tol: 1e-4,
            max_outer: 80,
            max_inner: 250,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            max_penalty: 1e12,
            cg_max: 200,
            trace_path: None,
        }
    }
}

/// One outer-iteration diagnostic record.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub feasibility: f64,
    pub stationarity: f64,
    pub penalty: f64,
    pub merit_start: f64,
    pub merit_end: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

struct Workspace {
    cons: Vec<Vec<f64>>,
    grad: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(problem: &NlpProblem) -> Self {
        Self {
            cons: problem.constraints.iter().map(|c| vec![0.0; c.dim()]).collect(),
            grad: vec![0.0; problem.n_vars],
            weights: problem.constraints.iter().map(|c| vec![0.0; c.dim()]).collect(),
        }
    }
}

fn eval_constraints(problem: &NlpProblem, x: &[f64], ws: &mut Workspace) -> bool {
    for (block, out) in problem.constraints.iter().zip(ws.cons.iter_mut()) {
        block.eval(x, out);
        if out.iter().any(|v| !v.is_finite()) {
            return false;
        }
    }
    true
}

/// Merit value for fixed multipliers and penalty; `None` on non-finite
/// evaluations.
fn al_value(
    problem: &NlpProblem,
    x: &[f64],
    lambda: &[Vec<f64>],
    rho: f64,
    ws: &mut Workspace,
) -> Option<f64> {
    let f = problem.objective.value(x);
    if !f.is_finite() {
        return None;
    }
    if !eval_constraints(problem, x, ws) {
        return None;
    }
    let mut total = f;
    for (bi, block) in problem.constraints.iter().enumerate() {
        let c = &ws.cons[bi];
        let lam = &lambda[bi];
        match block.kind() {
            ConstraintKind::Equality => {
                for i in 0..c.len() {
                    total += lam[i] * c[i] + 0.5 * rho * c[i] * c[i];
                }
            }
            ConstraintKind::Inequality => {
                for i in 0..c.len() {
                    let t = (lam[i] + rho * c[i]).max(0.0);
                    total += (t * t - lam[i] * lam[i]) / (2.0 * rho);
                }
            }
        }
    }
    total.is_finite().then_some(total)
}

/// Merit value and gradient; also leaves the first-order multiplier
/// estimates (lambda + rho c, projected for inequalities) in `ws.weights`.
fn al_value_grad(
    problem: &NlpProblem,
    x: &[f64],
    lambda: &[Vec<f64>],
    rho: f64,
    ws: &mut Workspace,
) -> Option<f64> {
    let value = al_value(problem, x, lambda, rho, ws)?;
    problem.objective.gradient(x, &mut ws.grad);
    for (bi, block) in problem.constraints.iter().enumerate() {
        let c = &ws.cons[bi];
        let lam = &lambda[bi];
        let w = &mut ws.weights[bi];
        match block.kind() {
            ConstraintKind::Equality => {
                for i in 0..c.len() {
                    w[i] = lam[i] + rho * c[i];
                }
            }
            ConstraintKind::Inequality => {
                for i in 0..c.len() {
                    w[i] = (lam[i] + rho * c[i]).max(0.0);
                }
            }
        }
    }
    for (bi, block) in problem.constraints.iter().enumerate() {
        let w = &ws.weights[bi];
        let grad = &mut ws.grad;
        block.jacobian(x, &mut |row, col, val| {
            grad[col] += w[row] * val;
        });
    }
    ws.grad.iter().all(|g| g.is_finite()).then_some(value)
}

fn violation(problem: &NlpProblem, ws: &Workspace) -> f64 {
    let mut v: f64 = 0.0;
    for (bi, block) in problem.constraints.iter().enumerate() {
        for &c in &ws.cons[bi] {
            let r = match block.kind() {
                ConstraintKind::Equality => c.abs(),
                ConstraintKind::Inequality => c.max(0.0),
            };
            v = v.max(r);
        }
    }
    v
}

/// Infinity norm of the projected gradient x - P(x - g).
fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut n: f64 = 0.0;
    for i in 0..x.len() {
        let step = (x[i] - g[i]).clamp(lo[i], hi[i]);
        n = n.max((x[i] - step).abs());
    }
    n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

enum InnerOutcome {
    Stationary,
    IterationCap,
    Stalled,
    NonFinite,
}

struct InnerReport {
    outcome: InnerOutcome,
    merit_start: f64,
    merit_end: f64,
    iterations: usize,
}

/// Constraint Jacobian at one iterate, cached as triplets together with the
/// per-row Gauss-Newton weights (rho on equalities and on active
/// inequalities, zero elsewhere).
struct GaussNewtonModel {
    triplets: Vec<(u32, u32, f64)>,
    row_weight: Vec<f64>,
    /// First-order multiplier estimates at the build point, frozen.
    w_frozen: Vec<f64>,
    /// grad f(x) + J(x)' w_frozen at the build point.
    gc0: Vec<f64>,
    /// Inequality activation (lambda + rho c > 0) at the build point.
    active0: Vec<bool>,
    /// Whether any forced row carries the equality-style offset weight.
    has_offset: bool,
    n_rows: usize,
}

impl GaussNewtonModel {
    /// Build from `ws`, which must hold constraints and multiplier
    /// estimates evaluated at `x`.
    fn build(
        problem: &NlpProblem,
        x: &[f64],
        lambda: &[Vec<f64>],
        rho: f64,
        ws: &Workspace,
        forced: &[bool],
        offset: bool,
    ) -> Self {
        let mut triplets = Vec::new();
        let mut base = 0usize;
        for block in &problem.constraints {
            block.jacobian(x, &mut |row, col, val| {
                triplets.push(((base + row) as u32, col as u32, val));
            });
            base += block.dim();
        }
        let total_rows = base;
        let mut row_weight = Vec::with_capacity(total_rows);
        let mut w_frozen = Vec::with_capacity(total_rows);
        let mut active0 = Vec::with_capacity(total_rows);
        let mut has_offset = false;
        let mut base = 0usize;
        for (bi, block) in problem.constraints.iter().enumerate() {
            for i in 0..block.dim() {
                let row = base + i;
                let t = lambda[bi][i] + rho * ws.cons[bi][i];
                let active = match block.kind() {
                    ConstraintKind::Equality => true,
                    // Rows that a rejected or heavily shortened step was seen
                    // to flip are treated as active: a step that crosses the
                    // activation boundary would otherwise meet a curvature
                    // wall the model knows nothing about and be rejected by
                    // the line search.
                    ConstraintKind::Inequality => forced[row] || t > 0.0,
                };
                row_weight.push(if active { rho } else { 0.0 });
                // With `offset`, a forced row still on the inactive side
                // enters the model equality-style with the unprojected
                // estimate lambda + rho c (negative), which pulls the model
                // minimizer onto the activation boundary in one step instead
                // of creeping toward it by O(1/rho) per iteration. Without
                // it the row only contributes its curvature wall.
                let w = if block.kind() == ConstraintKind::Inequality && active && t <= 0.0 {
                    if offset && t < 0.0 {
                        has_offset = true;
                        t
                    } else {
                        0.0
                    }
                } else {
                    ws.weights[bi][i]
                };
                w_frozen.push(w);
                active0.push(t > 0.0);
            }
            base += block.dim();
        }
        let mut gc0 = vec![0.0; problem.n_vars];
        problem.objective.gradient(x, &mut gc0);
        for &(row, col, val) in &triplets {
            gc0[col as usize] += w_frozen[row as usize] * val;
        }
        Self { triplets, row_weight, w_frozen, gc0, active0, has_offset, n_rows: base }
    }

    /// Jacobi preconditioner diagonal: the rho J' J part of the Hessian
    /// diagonal, floored at 1 so unconstrained directions stay well scaled.
    fn preconditioner(&self, n: usize) -> Vec<f64> {
        let mut d = vec![1.0; n];
        for &(row, col, val) in &self.triplets {
            d[col as usize] += self.row_weight[row as usize] * val * val;
        }
        d
    }

    /// Merit Hessian product: forward difference of
    /// grad f + J' w (weights frozen), which captures the objective and
    /// constraint curvature, plus the exact rho J' J term on active rows.
    #[allow(clippy::too_many_arguments)]
    fn hessian_vec(
        &self,
        problem: &NlpProblem,
        x: &[f64],
        v: &[f64],
        xt: &mut [f64],
        gt: &mut [f64],
        jv: &mut [f64],
        out: &mut [f64],
    ) -> bool {
        let vn = inf_norm(v);
        if vn == 0.0 {
            out.fill(0.0);
            return true;
        }
        let eps = 1e-7 * (1.0 + inf_norm(x)) / vn;
        for i in 0..x.len() {
            xt[i] = x[i] + eps * v[i];
        }
        problem.objective.gradient(xt, gt);
        let mut base = 0usize;
        for block in &problem.constraints {
            block.jacobian(xt, &mut |row, col, val| {
                gt[col] += self.w_frozen[base + row] * val;
            });
            base += block.dim();
        }
        for i in 0..x.len() {
            out[i] = (gt[i] - self.gc0[i]) / eps;
            if !out[i].is_finite() {
                return false;
            }
        }
        jv[..self.n_rows].fill(0.0);
        for &(row, col, val) in &self.triplets {
            jv[row as usize] += val * v[col as usize];
        }
        for r in 0..self.n_rows {
            jv[r] *= self.row_weight[r];
        }
        for &(row, col, val) in &self.triplets {
            out[col as usize] += val * jv[row as usize];
        }
        true
    }
}

/// Jacobian sparsity pattern of the whole problem, evaluated once at the
/// starting point, feeding the banded-plus-border preconditioner. Dense
/// columns (degree above 4x the median, floored at 32) go to the border.
fn build_plan(problem: &NlpProblem, x: &[f64]) -> SparsityPlan {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); problem.total_constraint_dim()];
    let mut base = 0usize;
    for block in &problem.constraints {
        block.jacobian(x, &mut |row, col, _| rows[base + row].push(col));
        base += block.dim();
    }
    for r in rows.iter_mut() {
        r.sort_unstable();
        r.dedup();
    }
    let mut degree = vec![0usize; problem.n_vars];
    for r in &rows {
        for &c in r {
            degree[c] += 1;
        }
    }
    let mut nonzero: Vec<usize> = degree.iter().copied().filter(|&d| d > 0).collect();
    nonzero.sort_unstable();
    let median = nonzero.get(nonzero.len() / 2).copied().unwrap_or(0);
    SparsityPlan::analyze(problem.n_vars, &rows, (4 * median).max(32))
}

/// Forward-difference diagonal of the objective Hessian, clamped to be
/// nonnegative; used only inside the preconditioner.
fn objective_diag(problem: &NlpProblem, x: &[f64]) -> Vec<f64> {
    let n = problem.n_vars;
    let mut g0 = vec![0.0; n];
    problem.objective.gradient(x, &mut g0);
    let mut xt = x.to_vec();
    let mut gt = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let eps = 1e-6 * (1.0 + x[i].abs());
        xt[i] = x[i] + eps;
        problem.objective.gradient(&xt, &mut gt);
        xt[i] = x[i];
        let v = (gt[i] - g0[i]) / eps;
        d[i] = if v.is_finite() { v.max(0.0) } else { 0.0 };
    }
    d
}

/// Minimize the merit for fixed (lambda, rho) from `x` in place with a
/// projected truncated-Newton iteration: conjugate gradients on the free
/// variables over the Gauss-Newton merit Hessian, then a backtracking
/// search along the projected path.
#[allow(clippy::too_many_arguments)]
fn inner_solve(
    problem: &NlpProblem,
    x: &mut Vec<f64>,
    lambda: &[Vec<f64>],
    rho: f64,
    tol: f64,
    max_newton: usize,
    cg_max: usize,
    plan: &SparsityPlan,
    obj_diag: &[f64],
    ws: &mut Workspace,
) -> InnerReport {
    let n = problem.n_vars;
    let (lo, hi) = (&problem.lower, &problem.upper);

    let report = |outcome, start, end, iters| InnerReport {
        outcome,
        merit_start: start,
        merit_end: end,
        iterations: iters,
    };
    let Some(mut value) = al_value_grad(problem, x, lambda, rho, ws) else {
        return report(InnerOutcome::NonFinite, f64::NAN, f64::NAN, 0);
    };
    let entry_value = value;
    let mut grad = ws.grad.clone();
    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let total_rows = problem.total_constraint_dim();
    let mut jv = vec![0.0; total_rows];
    // Inequality rows forced into the model after a rejected step showed
    // them flipping activation. A forced row is released once its activation
    // stays put between consecutive iterates, so settled rows do not leave
    // phantom curvature walls in the model.
    let mut forced = vec![false; total_rows];
    let mut last_active = vec![false; total_rows];
    let mut have_last = false;
    let (mut r, mut p, mut hp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);

    // Levenberg damping, adapted across Newton iterations: raised whenever
    // a step is rejected or CG meets negative curvature, lowered after
    // full-length accepted steps.
    let mut nu = 1e-4;
    let debug = std::env::var("INNER_DEBUG").is_ok();

    let mut iter = 0usize;
    while iter < max_newton {
        iter += 1;
        let pg_now = projected_gradient_norm(x, &grad, lo, hi);
        if pg_now <= tol {
            return report(InnerOutcome::Stationary, entry_value, value, iter);
        }

        // Release forced rows whose activation did not change since the
        // previous iterate: they are settled, and keeping them forced leaves
        // stale curvature walls that freeze progress near the solution.
        {
            let mut base = 0usize;
            for (bi, block) in problem.constraints.iter().enumerate() {
                if block.kind() == ConstraintKind::Inequality {
                    for i in 0..block.dim() {
                        let row = base + i;
                        let act = lambda[bi][i] + rho * ws.cons[bi][i] > 0.0;
                        if have_last && act == last_active[row] {
                            forced[row] = false;
                        }
                        last_active[row] = act;
                    }
                }
                base += block.dim();
            }
            have_last = true;
        }

        // Variables pinned at a bound with the gradient pushing outward stay
        // frozen for this Newton step.
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && grad[i] > 0.0) || (x[i] >= hi[i] && grad[i] < 0.0)))
            .collect();

        let mut use_offset = true;
        let mut model = GaussNewtonModel::build(problem, x, lambda, rho, ws, &forced, use_offset);
        let mut precond = model.preconditioner(n);
        let mut rebuild = false;

        let mut accepted = false;
        let mut step_alpha = 0.0;
        while !accepted {
            if rebuild {
                // ws may hold a rejected trial point; refresh it at x.
                if al_value_grad(problem, x, lambda, rho, ws).is_none() {
                    return report(InnerOutcome::NonFinite, entry_value, value, iter);
                }
                model = GaussNewtonModel::build(problem, x, lambda, rho, ws, &forced, use_offset);
                precond = model.preconditioner(n);
                rebuild = false;
            }
            // Preconditioned CG on (H + nu D) d = -g over the free
            // variables, truncated when the residual norm drops by 100x.
            // The preconditioner is the banded-plus-border factorization of
            // the damped Gauss-Newton matrix, falling back to Jacobi if the
            // factorization breaks down.
            let mut diag_extra = vec![0.0; n];
            for i in 0..n {
                diag_extra[i] = 1.0 + obj_diag[i] + nu * precond[i];
            }
            let factor =
                Factor::compute(plan, n, &model.triplets, &model.row_weight, &diag_extra, &free);
            let apply_precond = |rin: &[f64], zout: &mut [f64]| match &factor {
                Some(f) => f.apply(rin, zout),
                None => {
                    for i in 0..n {
                        zout[i] = rin[i] / (precond[i] * (1.0 + nu));
                    }
                }
            };
            // The CG right-hand side is the model gradient gc0, which equals
            // the merit gradient except on forced rows, where the
            // equality-style weight steers the step across the activation
            // boundary.
            dir.fill(0.0);
            for i in 0..n {
                r[i] = if free[i] { -model.gc0[i] } else { 0.0 };
            }
            let mut z = vec![0.0; n];
            apply_precond(&r, &mut z);
            p.copy_from_slice(&z);
            let mut rz = dot(&r, &z);
            let rr0 = dot(&r, &r);
            let mut cg_ok = true;
            let mut negative_curvature = false;
            let mut cg_used = 0usize;
            // Truncation needs both a relative reduction and an absolute
            // residual small against the current projected gradient; the
            // relative test alone leaves an O(sqrt(rr0)) error untouched at
            // every Newton step once the penalty inflates the raw gradient
            // far beyond the projected one.
            let cg_target = (1e-4 * rr0).min((0.1 * pg_now).powi(2)).max(1e-30 * rr0);
            for cg_iter in 0..cg_max {
                cg_used = cg_iter;
                if dot(&r, &r) <= cg_target {
                    break;
                }
                if !model.hessian_vec(problem, x, &p, &mut xt, &mut gt, &mut jv, &mut hp) {
                    cg_ok = false;
                    break;
                }
                for i in 0..n {
                    if free[i] {
                        hp[i] += nu * precond[i] * p[i];
                    } else {
                        hp[i] = 0.0;
                    }
                }
                let php = dot(&p, &hp);
                if !php.is_finite() || php <= 1e-12 * dot(&p, &p) {
                    if cg_iter == 0 {
                        dir.copy_from_slice(&z);
                    }
                    negative_curvature = true;
                    break;
                }
                let alpha = rz / php;
                for i in 0..n {
                    dir[i] += alpha * p[i];
                    r[i] -= alpha * hp[i];
                }
                apply_precond(&r, &mut z);
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for i in 0..n {
                    p[i] = z[i] + beta * p[i];
                }
            }
            if debug {
                eprintln!(
                    "      cg: used {cg_used} rr {:.3e}/{:.3e} nc {negative_curvature} nu {nu:.1e} fact {}",
                    dot(&r, &r),
                    rr0,
                    factor.is_some()
                );
            }
            if negative_curvature && nu < 1e8 {
                nu *= 10.0;
                continue;
            }

            // Fall back to projected steepest descent if CG produced
            // nothing useful or a non-descent direction.
            if !cg_ok || !(dot(&grad, &dir) < 0.0) {
                for i in 0..n {
                    dir[i] = if free[i] { -grad[i] } else { 0.0 };
                }
                if !(dot(&grad, &dir) < 0.0) {
                    return report(InnerOutcome::Stationary, entry_value, value, iter);
                }
            }

            // Backtracking Armijo along the projected path; the predicted
            // decrease uses the actual (clamped) step so active bounds
            // cannot inflate it.
            let mut alpha = 1.0;
            for _ in 0..20 {
                for i in 0..n {
                    trial[i] = (x[i] + alpha * dir[i]).clamp(lo[i], hi[i]);
                }
                let pred: f64 = (0..n).map(|i| grad[i] * (trial[i] - x[i])).sum();
                if pred < 0.0 {
                    if let Some(v) = al_value(problem, &trial, lambda, rho, ws) {
                        if v <= value + 1e-4 * pred {
                            accepted = true;
                            step_alpha = alpha;
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            if !accepted || step_alpha < 0.5 {
                // The full step was rejected or heavily shortened. Check
                // whether it crosses inequality activation boundaries the
                // model excluded; if so, force those rows active and retry
                // with the richer model before settling for a short step or
                // more damping.
                for i in 0..n {
                    xt[i] = (x[i] + dir[i]).clamp(lo[i], hi[i]);
                }
                let mut new_flip = false;
                if eval_constraints(problem, &xt, ws) {
                    let mut base = 0usize;
                    for (bi, block) in problem.constraints.iter().enumerate() {
                        if block.kind() == ConstraintKind::Inequality {
                            for i in 0..block.dim() {
                                let row = base + i;
                                let act = lambda[bi][i] + rho * ws.cons[bi][i] > 0.0;
                                if act != model.active0[row] && model.row_weight[row] == 0.0 {
                                    forced[row] = true;
                                    new_flip = true;
                                }
                            }
                        }
                        base += block.dim();
                    }
                }
                if debug {
                    let nf = forced.iter().filter(|&&f| f).count();
                    eprintln!(
                        "      short/reject: acc {accepted} alpha {step_alpha:.4} forced {nf} new_flip {new_flip} nu {nu:.1e}"
                    );
                }
                if new_flip {
                    accepted = false;
                    rebuild = true;
                    continue;
                }
            }
            if !accepted {
                // The equality-style offsets can poison the step direction
                // when a forced row is far from its boundary; retry with pure
                // curvature walls before escalating the damping.
                if use_offset && model.has_offset {
                    use_offset = false;
                    rebuild = true;
                    continue;
                }
                if nu >= 1e10 {
                    return report(InnerOutcome::Stalled, entry_value, value, iter);
                }
                nu *= 10.0;
            }
        }

        let Some(new_value) = al_value_grad(problem, &trial, lambda, rho, ws) else {
            return report(InnerOutcome::NonFinite, entry_value, value, iter);
        };
        if debug {
            eprintln!(
                "    newton {iter}: pg {:.3e} nu {:.1e} alpha {step_alpha:.4} merit {value:.8} -> {new_value:.8}",
                projected_gradient_norm(x, &grad, lo, hi),
                nu
            );
        }
        x.copy_from_slice(&trial);
        grad.copy_from_slice(&ws.grad);
        value = new_value;
        if step_alpha >= 0.99 {
            nu = (nu * 0.25).max(1e-10);
        } else if step_alpha < 0.1 {
            nu = (nu * 10.0).min(1e8);
        }
    }
    report(InnerOutcome::IterationCap, entry_value, value, max_newton)
}

/// Solve the problem from `x0` (clamped to the bounds).
pub fn solve(problem: &NlpProblem, x0: &[f64], options: &SolveOptions) -> NlpSolution {
    let (solution, trace) = solve_traced(problem, x0, options);
    if let Some(path) = &options.trace_path {
        if let Ok(mut f) = std::fs::File::create(path) {
            let _ = writeln!(f, "iter,objective,feasibility,stationarity,penalty");
            for row in &trace {
                let _ = writeln!(
                    f,
                    "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                    row.iter, row.objective, row.feasibility, row.stationarity, row.penalty
                );
            }
        }
    }
    solution
}

/// [`solve`] plus the per-outer-iteration diagnostic trace.
pub fn solve_traced(
    problem: &NlpProblem,
    x0: &[f64],
    options: &SolveOptions,
) -> (NlpSolution, Vec<TraceRow>) {
    assert_eq!(x0.len(), problem.n_vars, "x0 dimension mismatch");
    problem.validate().expect("ill-formed problem");

    let mut x = x0.to_vec();
    problem.clamp_to_bounds(&mut x);

    let mut ws = Workspace::new(problem);
    let plan = build_plan(problem, &x);
    let obj_diag = objective_diag(problem, &x);
    let mut lambda: Vec<Vec<f64>> =
        problem.constraints.iter().map(|c| vec![0.0; c.dim()]).collect();
    let mut rho = options.initial_penalty;
    let mut trace: Vec<TraceRow> = Vec::new();
    // Feasibility target for multiplier updates and stationarity target for
    // the inner solves, both tightened on the usual penalty-linked schedule:
    // updates happen whenever the violation beats eta, otherwise the penalty
    // grows and both targets reset.
    let mut eta = 1.0 / rho.powf(0.1);
    let mut inner_tol = (1.0 / rho).clamp(options.stationarity_tol * 0.5, 1e-2);

    let mut status = SolveStatus::MaxIterations;
    let mut kkt = KktResiduals::default();
    let mut iterations = 0;

    for outer in 0..options.max_outer {
        iterations = outer + 1;
        let inner = inner_solve(
            problem,
            &mut x,
            &lambda,
            rho,
            inner_tol,
            options.max_inner,
            options.cg_max,
            &plan,
            &obj_diag,
            &mut ws,
        );
        if matches!(inner.outcome, InnerOutcome::NonFinite) {
            status = SolveStatus::NumericalFailure;
            break;
        }

        // ws now holds constraints and first-order multiplier estimates at x.
        if al_value_grad(problem, &x, &lambda, rho, &mut ws).is_none() {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let feas = violation(problem, &ws);
        let stat = projected_gradient_norm(&x, &ws.grad, &problem.lower, &problem.upper);
        let mut compl: f64 = 0.0;
        for (bi, block) in problem.constraints.iter().enumerate() {
            if block.kind() == ConstraintKind::Inequality {
                for i in 0..ws.cons[bi].len() {
                    compl = compl.max((ws.weights[bi][i] * ws.cons[bi][i]).abs());
                }
            }
        }
        kkt = KktResiduals { stationarity: stat, feasibility: feas, complementarity: compl };
        trace.push(TraceRow {
            iter: outer,
            objective: problem.objective.value(&x),
            feasibility: feas,
            stationarity: stat,
            penalty: rho,
            merit_start: inner.merit_start,
            merit_end: inner.merit_end,
            inner_iterations: inner.iterations,
            inner_converged: matches!(inner.outcome, InnerOutcome::Stationary),
        });

        if feas <= options.feasibility_tol && stat <= options.stationarity_tol {
            status = SolveStatus::Converged;
            break;
        }

        if feas <= eta.max(options.feasibility_tol) {
            // Good progress: first-order multiplier update, tighter targets.
            for (bi, lam) in lambda.iter_mut().enumerate() {
                lam.copy_from_slice(&ws.weights[bi]);
            }
            eta = (eta / rho.powf(0.9)).max(options.feasibility_tol * 0.1);
            inner_tol = (inner_tol / rho).max(options.stationarity_tol * 0.5);
        } else {
            rho *= options.penalty_growth;
            if rho > options.max_penalty {
                status = if feas > options.feasibility_tol {
                    SolveStatus::Infeasible
                } else {
                    SolveStatus::MaxIterations
                };
                break;
            }
            eta = 1.0 / rho.powf(0.1);
            inner_tol = (1.0 / rho).clamp(options.stationarity_tol * 0.5, 1e-2);
        }
    }

    let solution = NlpSolution {
        objective_value: problem.objective.value(&x),
        x_opt: x,
        status,
        kkt,
        iterations,
        multipliers: lambda,
        penalty: rho,
    };
    (solution, trace)
}
