//! Actor-critic policy: separate ELU MLPs for the action mean and the value,
//! plus a learned state-independent log standard deviation.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::net::Mlp;
use super::obs::OBS_DIM;
use crate::morphology::NUM_JOINTS;

const LOG_2PI: f32 = 1.837_877_1;

/// Actor and critic networks with the Gaussian action head.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic: Mlp,
    pub log_std: Array1<f32>,
    pub g_log_std: Array1<f32>,
    m_log_std: Array1<f32>,
    v_log_std: Array1<f32>,
}

impl ActorCritic {
    pub fn new(hidden: &[usize], init_std: f32, rng: &mut ChaCha8Rng) -> Self {
        let mut actor_sizes = vec![OBS_DIM];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(NUM_JOINTS);
        let mut critic_sizes = vec![OBS_DIM];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        Self {
            actor: Mlp::new(&actor_sizes, 0.01, rng),
            critic: Mlp::new(&critic_sizes, 1.0, rng),
            log_std: Array1::from_elem(NUM_JOINTS, init_std.ln()),
            g_log_std: Array1::zeros(NUM_JOINTS),
            m_log_std: Array1::zeros(NUM_JOINTS),
            v_log_std: Array1::zeros(NUM_JOINTS),
        }
    }

    /// Deterministic action (the mean) for a batch of observations.
    pub fn act_mean(&self, obs: &Array2<f32>) -> Array2<f32> {
        self.actor.forward(obs)
    }

    pub fn values(&self, obs: &Array2<f32>) -> Array1<f32> {
        self.critic.forward(obs).index_axis(Axis(1), 0).to_owned()
    }

    /// Sample stochastic actions; returns (actions, log-probs).
    pub fn act_sample(
        &self,
        obs: &Array2<f32>,
        rng: &mut ChaCha8Rng,
    ) -> (Array2<f32>, Array1<f32>) {
        let mean = self.actor.forward(obs);
        let n = mean.nrows();
        let mut actions = mean.clone();
        for i in 0..n {
            for j in 0..NUM_JOINTS {
                let z: f32 = rng.sample(StandardNormal);
                actions[(i, j)] += self.log_std[j].exp() * z;
            }
        }
        let logp = self.log_prob(&mean, &actions);
        (actions, logp)
    }

    /// Log-probability of `actions` under Gaussian heads centered at `mean`.
    pub fn log_prob(&self, mean: &Array2<f32>, actions: &Array2<f32>) -> Array1<f32> {
        let n = mean.nrows();
        let mut out = Array1::zeros(n);
        for i in 0..n {
            let mut lp = 0.0f32;
            for j in 0..NUM_JOINTS {
                let ls = self.log_std[j];
                let z = (actions[(i, j)] - mean[(i, j)]) / ls.exp();
                lp += -0.5 * z * z - ls - 0.5 * LOG_2PI;
            }
            out[i] = lp;
        }
        out
    }

    /// Differential entropy of the Gaussian head (state independent).
    pub fn entropy(&self) -> f32 {
        self.log_std.iter().map(|ls| ls + 0.5 * (LOG_2PI + 1.0)).sum()
    }

    pub fn zero_grad(&mut self) {
        self.actor.zero_grad();
        self.critic.zero_grad();
        self.g_log_std.fill(0.0);
    }

    /// Global gradient norm over actor, critic and log-std.
    pub fn grad_norm(&self) -> f32 {
        (self.actor.grad_sq_norm()
            + self.critic.grad_sq_norm()
            + self.g_log_std.iter().map(|g| g * g).sum::<f32>())
        .sqrt()
    }

    pub fn scale_grads(&mut self, s: f32) {
        self.actor.scale_grads(s);
        self.critic.scale_grads(s);
        self.g_log_std.mapv_inplace(|g| g * s);
    }

    pub fn adam_step(&mut self, lr: f32, t: u64) {
        self.actor.adam_step(lr, t);
        self.critic.adam_step(lr, t);
        let (b1, b2, eps) = (0.9f32, 0.999f32, 1e-8f32);
        let bc1 = 1.0 - b1.powi(t as i32);
        let bc2 = 1.0 - b2.powi(t as i32);
        ndarray::Zip::from(&mut self.log_std)
            .and(&self.g_log_std)
            .and(&mut self.m_log_std)
            .and(&mut self.v_log_std)
            .for_each(|w, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            });
    }
}
