//! Cost assembly for the jump NLP: per-phase quadratic terms plus
//! regularization of times, joint angles and the landing slack.

use std::sync::Arc;

use super::problem::ProblemData;
use crate::morphology::NUM_JOINTS;
use crate::nlp::Objective;

/// Per-term cost values; `total` is their sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CostTerms {
    pub stance: f64,
    pub takeoff: f64,
    pub flight: f64,
    pub land: f64,
    pub time: f64,
    pub joints: f64,
    pub slack: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.stance + self.takeoff + self.flight + self.land + self.time + self.joints + self.slack
    }
}

/// Weights, in order: force smoothness, force magnitude (both inside the
/// stance term), take-off velocity, flight duration, landing velocity,
/// total time, joint deviation from homing, landing slack.
pub struct JumpCost {
    data: Arc<ProblemData>,
    w: [f64; 8],
}

impl JumpCost {
    pub fn new(data: Arc<ProblemData>, weights: [f64; 8]) -> Self {
        Self { data, w: weights }
    }

    pub fn breakdown(&self, x: &[f64]) -> CostTerms {
        let l = self.data.layout;
        let mut t = CostTerms::default();

        for k in 0..l.n_s {
            for j in 0..12 {
                let u = x[l.u(k) + j];
                t.stance += self.w[1] * u * u;
                if k + 1 < l.n_s {
                    let d = x[l.u(k + 1) + j] - u;
                    t.stance += self.w[0] * d * d;
                }
            }
        }

        let takeoff = l.n_s - 1;
        let landing = l.n_knots() - 1;
        for a in 0..3 {
            t.takeoff += self.w[2] * x[l.vel(takeoff) + a] * x[l.vel(takeoff) + a];
            t.land += self.w[4] * x[l.vel(landing) + a] * x[l.vel(landing) + a];
        }

        let tf = x[l.t_flight()];
        t.flight = self.w[3] * tf * tf;
        t.time = self.w[5] * (x[l.t_stance()] + tf);

        for k in 0..l.n_s {
            for j in 0..NUM_JOINTS {
                let d = x[l.q(k) + j] - self.data.q_home[j];
                t.joints += self.w[6] * d * d;
            }
        }
        for a in 0..3 {
            t.slack += self.w[7] * x[l.xi() + a] * x[l.xi() + a];
        }
        t
    }
}

impl Objective for JumpCost {
    fn value(&self, x: &[f64]) -> f64 {
        self.breakdown(x).total()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let l = self.data.layout;

        for k in 0..l.n_s {
            for j in 0..12 {
                let idx = l.u(k) + j;
                grad[idx] += 2.0 * self.w[1] * x[idx];
                if k + 1 < l.n_s {
                    let next = l.u(k + 1) + j;
                    let d = x[next] - x[idx];
                    grad[next] += 2.0 * self.w[0] * d;
                    grad[idx] -= 2.0 * self.w[0] * d;
                }
            }
        }

        let takeoff = l.n_s - 1;
        let landing = l.n_knots() - 1;
        for a in 0..3 {
            grad[l.vel(takeoff) + a] += 2.0 * self.w[2] * x[l.vel(takeoff) + a];
            grad[l.vel(landing) + a] += 2.0 * self.w[4] * x[l.vel(landing) + a];
        }

        grad[l.t_flight()] += 2.0 * self.w[3] * x[l.t_flight()] + self.w[5];
        grad[l.t_stance()] += self.w[5];

        for k in 0..l.n_s {
            for j in 0..NUM_JOINTS {
                let idx = l.q(k) + j;
                grad[idx] += 2.0 * self.w[6] * (x[idx] - self.data.q_home[j]);
            }
        }
        for a in 0..3 {
            grad[l.xi() + a] += 2.0 * self.w[7] * x[l.xi() + a];
        }
    }
}
