//! Sparse nonlinear programming: minimize f(x) subject to equality and
//! inequality (<= 0) constraint blocks and per-variable box bounds.
//!
//! The solver is an augmented Lagrangian method with a projected
//! truncated-Newton inner loop; see [`solver`]. Gradient verification
//! against central differences lives in [`check`].

mod check;
mod precond;
mod solver;

pub use check::{check_gradients, kkt_residuals, GradientReport};
pub use solver::{solve, solve_traced, SolveOptions, TraceRow};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Equality,
    /// Feasible when c(x) <= 0.
    Inequality,
}

/// Objective with analytic gradient.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    /// Writes the full gradient into `grad` (overwriting it).
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

/// A block of constraints sharing one kind and one sparse Jacobian routine.
pub trait Constraint {
    fn dim(&self) -> usize;
    fn kind(&self) -> ConstraintKind;
    fn name(&self) -> &str;
    fn eval(&self, x: &[f64], out: &mut [f64]);
    /// Reports all nonzero Jacobian entries as (local_row, col, value).
    fn jacobian(&self, x: &[f64], emit: &mut dyn FnMut(usize, usize, f64));
}

pub struct NlpProblem {
    pub n_vars: usize,
    pub objective: Box<dyn Objective>,
    pub constraints: Vec<Box<dyn Constraint>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl NlpProblem {
    pub fn total_constraint_dim(&self) -> usize {
        self.constraints.iter().map(|c| c.dim()).sum()
    }

    pub fn clamp_to_bounds(&self, x: &mut [f64]) {
        for i in 0..self.n_vars {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn validate(&self) -> Result<(), NlpError> {
        if self.lower.len() != self.n_vars || self.upper.len() != self.n_vars {
            return Err(NlpError::BadProblem("bounds length mismatch".into()));
        }
        for i in 0..self.n_vars {
            if self.lower[i] > self.upper[i] {
                return Err(NlpError::BadProblem(format!(
                    "lower bound exceeds upper bound at variable {i}"
                )));
            }
        }
        Ok(())
    }
}

/// Objective defined by closures; convenient for small problems and tests.
pub struct ClosureObjective {
    pub value: Box<dyn Fn(&[f64]) -> f64>,
    pub gradient: Box<dyn Fn(&[f64], &mut [f64])>,
}

impl Objective for ClosureObjective {
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (self.gradient)(x, grad)
    }
}

/// Constraint block defined by closures.
pub struct ClosureConstraint {
    pub dim: usize,
    pub kind: ConstraintKind,
    pub name: String,
    pub eval: Box<dyn Fn(&[f64], &mut [f64])>,
    pub jacobian: Box<dyn Fn(&[f64], &mut dyn FnMut(usize, usize, f64))>,
}

impl Constraint for ClosureConstraint {
    fn dim(&self) -> usize {
        self.dim
    }
    fn kind(&self) -> ConstraintKind {
        self.kind
    }
    fn name(&self) -> &str {
        &self.name
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }
    fn jacobian(&self, x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        (self.jacobian)(x, emit)
    }
}

#[derive(Debug, Error)]
pub enum NlpError {
    #[error("ill-formed problem: {0}")]
    BadProblem(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

/// Stationarity, primal feasibility and complementarity residuals.
#[derive(Debug, Clone, Copy, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.feasibility).max(self.complementarity)
    }
}

#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub x_opt: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    pub kkt: KktResiduals,
    pub iterations: usize,
    /// Final multiplier estimates, one vector per constraint block.
    pub multipliers: Vec<Vec<f64>>,
    /// Final penalty parameter.
    pub penalty: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unconstrained(n: usize, value: impl Fn(&[f64]) -> f64 + 'static,
                     gradient: impl Fn(&[f64], &mut [f64]) + 'static,
                     lo: f64, hi: f64) -> NlpProblem {
        NlpProblem {
            n_vars: n,
            objective: Box::new(ClosureObjective {
                value: Box::new(value),
                gradient: Box::new(gradient),
            }),
            constraints: vec![],
            lower: vec![lo; n],
            upper: vec![hi; n],
        }
    }

    #[test]
    fn quadratic_unconstrained_minimum() {
        let p = unconstrained(
            1,
            |x| (x[0] - 3.0).powi(2),
            |x, g| g[0] = 2.0 * (x[0] - 3.0),
            -10.0,
            10.0,
        );
        let sol = solve(&p, &[0.0], &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Converged);
        assert_relative_eq!(sol.x_opt[0], 3.0, epsilon = 1e-6);
        assert!(sol.objective_value < 1e-10);
    }

    #[test]
    fn equality_constrained_symmetric_quadratic() {
        let p = NlpProblem {
            n_vars: 2,
            objective: Box::new(ClosureObjective {
                value: Box::new(|x| x[0] * x[0] + x[1] * x[1]),
                gradient: Box::new(|x, g| {
                    g[0] = 2.0 * x[0];
                    g[1] = 2.0 * x[1];
                }),
            }),
            constraints: vec![Box::new(ClosureConstraint {
                dim: 1,
                kind: ConstraintKind::Equality,
                name: "sum".into(),
                eval: Box::new(|x, out| out[0] = x[0] + x[1] - 1.0),
                jacobian: Box::new(|_x, emit| {
                    emit(0, 0, 1.0);
                    emit(0, 1, 1.0);
                }),
            })],
            lower: vec![-10.0; 2],
            upper: vec![10.0; 2],
        };
        let sol = solve(&p, &[0.0, 0.0], &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Converged);
        assert_relative_eq!(sol.x_opt[0], 0.5, epsilon = 1e-6);
        assert_relative_eq!(sol.x_opt[1], 0.5, epsilon = 1e-6);
    }

    /// Independent oracle: repeatedly refine a dense grid around the best
    /// cell. Only used to pin the Rosenbrock optimum.
    fn grid_refine_oracle(f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
        let (mut cx, mut cy, mut half) = (0.0f64, 0.0f64, 2.0f64);
        for _ in 0..40 {
            let mut best = (f64::INFINITY, cx, cy);
            let m = 20;
            for i in 0..=m {
                for j in 0..=m {
                    let x = cx - half + 2.0 * half * (i as f64) / (m as f64);
                    let y = cy - half + 2.0 * half * (j as f64) / (m as f64);
                    let v = f(x, y);
                    if v < best.0 {
                        best = (v, x, y);
                    }
                }
            }
            cx = best.1;
            cy = best.2;
            half *= 0.2;
        }
        (cx, cy)
    }

    #[test]
    fn rosenbrock_bounded() {
        let rosen = |x: f64, y: f64| (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
        let (ox, oy) = grid_refine_oracle(rosen);
        assert_relative_eq!(ox, 1.0, epsilon = 1e-6);
        assert_relative_eq!(oy, 1.0, epsilon = 1e-6);

        let p = unconstrained(
            2,
            move |x| rosen(x[0], x[1]),
            |x, g| {
                g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
                g[1] = 200.0 * (x[1] - x[0] * x[0]);
            },
            -2.0,
            2.0,
        );
        let mut opts = SolveOptions::default();
        opts.stationarity_tol = 1e-8;
        let sol = solve(&p, &[-1.2, 1.0], &opts);
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!((sol.x_opt[0] - ox).abs() < 1e-4);
        assert!((sol.x_opt[1] - oy).abs() < 1e-4);
    }

    fn infeasible_problem() -> NlpProblem {
        NlpProblem {
            n_vars: 1,
            objective: Box::new(ClosureObjective {
                value: Box::new(|x| x[0] * x[0]),
                gradient: Box::new(|x, g| g[0] = 2.0 * x[0]),
            }),
            constraints: vec![
                Box::new(ClosureConstraint {
                    dim: 1,
                    kind: ConstraintKind::Inequality,
                    name: "x_le_minus_one".into(),
                    eval: Box::new(|x, out| out[0] = x[0] + 1.0),
                    jacobian: Box::new(|_x, emit| emit(0, 0, 1.0)),
                }),
                Box::new(ClosureConstraint {
                    dim: 1,
                    kind: ConstraintKind::Inequality,
                    name: "x_ge_one".into(),
                    eval: Box::new(|x, out| out[0] = 1.0 - x[0]),
                    jacobian: Box::new(|_x, emit| emit(0, 0, -1.0)),
                }),
            ],
            lower: vec![-10.0],
            upper: vec![10.0],
        }
    }

    #[test]
    fn empty_feasible_set_reports_infeasible() {
        let sol = solve(&infeasible_problem(), &[0.0], &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn merit_non_increasing_within_outer_iterations() {
        let p = infeasible_problem();
        let (_, trace) = solve_traced(&p, &[0.0], &SolveOptions::default());
        assert!(!trace.is_empty());
        for row in &trace {
            assert!(
                row.merit_end <= row.merit_start + 1e-12,
                "merit increased in outer iteration {}",
                row.iter
            );
        }
    }

    #[test]
    fn deterministic_iterate_sequence() {
        let make = || {
            unconstrained(
                2,
                |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
                |x, g| {
                    g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
                    g[1] = 200.0 * (x[1] - x[0] * x[0]);
                },
                -2.0,
                2.0,
            )
        };
        let a = solve(&make(), &[-1.2, 1.0], &SolveOptions::default());
        let b = solve(&make(), &[-1.2, 1.0], &SolveOptions::default());
        assert_eq!(a.x_opt, b.x_opt);
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn converged_solution_passes_independent_kkt_check() {
        let p = NlpProblem {
            n_vars: 2,
            objective: Box::new(ClosureObjective {
                value: Box::new(|x| x[0] * x[0] + x[1] * x[1]),
                gradient: Box::new(|x, g| {
                    g[0] = 2.0 * x[0];
                    g[1] = 2.0 * x[1];
                }),
            }),
            constraints: vec![Box::new(ClosureConstraint {
                dim: 1,
                kind: ConstraintKind::Equality,
                name: "sum".into(),
                eval: Box::new(|x, out| out[0] = x[0] + x[1] - 1.0),
                jacobian: Box::new(|_x, emit| {
                    emit(0, 0, 1.0);
                    emit(0, 1, 1.0);
                }),
            })],
            lower: vec![-10.0; 2],
            upper: vec![10.0; 2],
        };
        let sol = solve(&p, &[3.0, -2.0], &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Converged);
        let kkt = kkt_residuals(&p, &sol.x_opt, &sol.multipliers);
        assert!(kkt.feasibility <= 1e-6, "feasibility {}", kkt.feasibility);
        assert!(kkt.stationarity <= 1e-3, "stationarity {}", kkt.stationarity);
    }

    #[test]
    fn check_gradients_exact_quadratic() {
        let p = unconstrained(
            3,
            |x| x.iter().map(|v| v * v).sum(),
            |x, g| {
                for i in 0..3 {
                    g[i] = 2.0 * x[i];
                }
            },
            -10.0,
            10.0,
        );
        let report = check_gradients(&p, &[0.3, -1.2, 2.0], 1e-5);
        assert!(report.max_error() < 1e-9, "error {}", report.max_error());
    }

    #[test]
    fn check_gradients_flags_corrupted_gradient() {
        let p = unconstrained(
            2,
            |x| x[0] * x[0] + x[1] * x[1],
            |x, g| {
                g[0] = 2.0 * x[0] + 0.5; // deliberately wrong
                g[1] = 2.0 * x[1];
            },
            -10.0,
            10.0,
        );
        let report = check_gradients(&p, &[0.7, 0.1], 1e-5);
        assert!(report.objective_error > 1e-2);
    }

    #[test]
    fn x0_outside_bounds_is_clamped() {
        let p = unconstrained(1, |x| x[0] * x[0], |x, g| g[0] = 2.0 * x[0], 1.0, 5.0);
        let sol = solve(&p, &[100.0], &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Converged);
        assert_relative_eq!(sol.x_opt[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn non_finite_objective_is_numerical_failure() {
        let p = unconstrained(1, |_| f64::NAN, |_, g| g[0] = f64::NAN, -1.0, 1.0);
        let sol = solve(&p, &[0.0], &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::NumericalFailure);
    }
}
