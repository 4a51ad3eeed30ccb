//! Clipped-surrogate policy update with value regression, entropy bonus and
//! a KL-adaptive learning rate.

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::policy::ActorCritic;
use super::PpoConfig;
use crate::morphology::NUM_JOINTS;

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error("non-finite loss during update: policy {policy}, value {value}")]
    NonFiniteLoss { policy: f32, value: f32 },
    #[error("batch size {batch} not divisible into {mini_batches} mini-batches")]
    BadBatchSplit { batch: usize, mini_batches: usize },
}

/// Diagnostics from one full update (all epochs).
#[derive(Debug, Clone, Default)]
pub struct UpdateStats {
    pub policy_loss: f32,
    pub value_loss: f32,
    pub entropy: f32,
    pub approx_kl: f32,
    pub clip_fraction: f32,
    pub grad_norm: f32,
    pub lr: f64,
}

/// One rollout batch ready for optimization.
pub struct Batch {
    pub obs: Array2<f32>,
    pub actions: Array2<f32>,
    pub old_log_probs: Array1<f32>,
    pub advantages: Array1<f32>,
    pub returns: Array1<f32>,
}

/// Normalize advantages to zero mean and unit standard deviation in place.
pub fn normalize_advantages(adv: &mut Array1<f32>) {
    let n = adv.len() as f32;
    let mean = adv.sum() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f32>() / n;
    let std = var.sqrt().max(1e-8);
    adv.mapv_inplace(|a| (a - mean) / std);
}

/// Accumulate gradients of the PPO objective on one mini-batch and return
/// (policy_loss, value_loss, entropy, approx_kl, clip_fraction).
fn minibatch_grads(
    policy: &mut ActorCritic,
    obs: &Array2<f32>,
    actions: &Array2<f32>,
    old_log_probs: &Array1<f32>,
    advantages: &Array1<f32>,
    returns: &Array1<f32>,
    cfg: &PpoConfig,
) -> (f32, f32, f32, f32, f32) {
    let n = obs.nrows();
    let nf = n as f32;
    let clip = cfg.clip_range as f32;
    let c_v = cfg.value_loss_coeff as f32;
    let c_e = cfg.entropy_coeff as f32;

    let (mean, actor_cache) = policy.actor.forward_train(obs);
    let (values, critic_cache) = policy.critic.forward_train(obs);
    let log_probs = policy.log_prob(&mean, actions);

    let mut policy_loss = 0.0f32;
    let mut kl = 0.0f32;
    let mut clipped = 0usize;
    let mut d_mean = Array2::<f32>::zeros(mean.raw_dim());
    for i in 0..n {
        let ratio = (log_probs[i] - old_log_probs[i]).exp();
        let a = advantages[i];
        let unclipped = ratio * a;
        let clipped_term = ratio.clamp(1.0 - clip, 1.0 + clip) * a;
        policy_loss += -unclipped.min(clipped_term) / nf;
        kl += (old_log_probs[i] - log_probs[i]) / nf;
        let clip_active = unclipped > clipped_term;
        if (ratio - 1.0).abs() > clip {
            clipped += 1;
        }
        if !clip_active {
            // d(-ratio*A)/d logp = -ratio*A; chain into mean and log-std.
            let d_logp = -ratio * a / nf;
            for j in 0..NUM_JOINTS {
                let std = policy.log_std[j].exp();
                let z = (actions[(i, j)] - mean[(i, j)]) / std;
                d_mean[(i, j)] += d_logp * z / std;
                policy.g_log_std[j] += d_logp * (z * z - 1.0);
            }
        }
    }
    // Entropy bonus: depends only on log_std, gradient -c_e per dimension.
    let entropy = policy.entropy();
    for j in 0..NUM_JOINTS {
        policy.g_log_std[j] -= c_e;
    }

    let mut value_loss = 0.0f32;
    let mut d_v = Array2::<f32>::zeros(values.raw_dim());
    for i in 0..n {
        let err = values[(i, 0)] - returns[i];
        value_loss += err * err / nf;
        d_v[(i, 0)] = c_v * 2.0 * err / nf;
    }

    policy.actor.backward(&actor_cache, &d_mean);
    policy.critic.backward(&critic_cache, &d_v);
    (policy_loss, value_loss, entropy, kl, clipped as f32 / nf)
}

/// Run the full epoch/mini-batch optimization on one rollout batch and adapt
/// the learning rate toward the KL target.
pub fn ppo_update(
    policy: &mut ActorCritic,
    batch: &mut Batch,
    cfg: &PpoConfig,
    lr: &mut f64,
    adam_t: &mut u64,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats, UpdateError> {
    let n = batch.obs.nrows();
    if n % cfg.mini_batches != 0 {
        return Err(UpdateError::BadBatchSplit { batch: n, mini_batches: cfg.mini_batches });
    }
    normalize_advantages(&mut batch.advantages);

    let mb_size = n / cfg.mini_batches;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();
    let mut updates = 0usize;

    for _epoch in 0..cfg.num_epochs {
        indices.shuffle(rng);
        for mb in 0..cfg.mini_batches {
            let sel = &indices[mb * mb_size..(mb + 1) * mb_size];
            let obs = select_rows(&batch.obs, sel);
            let actions = select_rows(&batch.actions, sel);
            let old_lp = select(&batch.old_log_probs, sel);
            let adv = select(&batch.advantages, sel);
            let ret = select(&batch.returns, sel);

            policy.zero_grad();
            let (pl, vl, ent, kl, cf) =
                minibatch_grads(policy, &obs, &actions, &old_lp, &adv, &ret, cfg);
            if !pl.is_finite() || !vl.is_finite() {
                return Err(UpdateError::NonFiniteLoss { policy: pl, value: vl });
            }
            let gn = policy.grad_norm();
            if gn > cfg.max_grad_norm as f32 {
                policy.scale_grads(cfg.max_grad_norm as f32 / gn);
            }
            *adam_t += 1;
            policy.adam_step(*lr as f32, *adam_t);

            stats.policy_loss += pl;
            stats.value_loss += vl;
            stats.entropy += ent;
            stats.approx_kl += kl;
            stats.clip_fraction += cf;
            stats.grad_norm += gn;
            updates += 1;
        }
    }
    let u = updates as f32;
    stats.policy_loss /= u;
    stats.value_loss /= u;
    stats.entropy /= u;
    stats.approx_kl /= u;
    stats.clip_fraction /= u;
    stats.grad_norm /= u;

    // Double or halve the learning rate toward the KL target.
    let kl = stats.approx_kl as f64;
    if kl > 2.0 * cfg.kl_target {
        *lr = (*lr / 2.0).max(cfg.min_lr);
    } else if kl >= 0.0 && kl < cfg.kl_target / 2.0 {
        *lr = (*lr * 2.0).min(cfg.max_lr);
    }
    stats.lr = *lr;
    Ok(stats)
}

fn select_rows(src: &Array2<f32>, idx: &[usize]) -> Array2<f32> {
    let mut out = Array2::zeros((idx.len(), src.ncols()));
    for (k, &i) in idx.iter().enumerate() {
        out.slice_mut(s![k, ..]).assign(&src.index_axis(Axis(0), i));
    }
    out
}

fn select(src: &Array1<f32>, idx: &[usize]) -> Array1<f32> {
    Array1::from_iter(idx.iter().map(|&i| src[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::obs::OBS_DIM;
    use rand::Rng;
    use rand::SeedableRng;

    fn tiny_cfg() -> PpoConfig {
        PpoConfig {
            hidden: vec![16],
            num_epochs: 1,
            mini_batches: 1,
            entropy_coeff: 0.01,
            ..PpoConfig::default()
        }
    }

    fn random_batch(n: usize, policy: &ActorCritic, rng: &mut ChaCha8Rng) -> Batch {
        let obs = Array2::from_shape_fn((n, OBS_DIM), |_| rng.gen_range(-1.0f32..1.0));
        let mean = policy.act_mean(&obs);
        let actions =
            Array2::from_shape_fn((n, NUM_JOINTS), |ij| mean[ij] + rng.gen_range(-0.5f32..0.5));
        let old_log_probs = policy.log_prob(&mean, &actions);
        let advantages = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0f32..1.0));
        let returns = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0f32..1.0));
        Batch { obs, actions, old_log_probs, advantages, returns }
    }

    #[test]
    fn advantage_normalization_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut adv = Array1::from_shape_fn(512, |_| rng.gen_range(-3.0f32..5.0));
        normalize_advantages(&mut adv);
        let n = adv.len() as f32;
        let mean = adv.sum() / n;
        let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f32>() / n;
        assert!(mean.abs() < 1e-6, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-5, "var {var}");
    }

    /// Finite-difference check of the accumulated gradient of the combined
    /// objective (policy + value + entropy terms) for actor weights, critic
    /// weights and the log standard deviation.
    #[test]
    fn minibatch_gradients_match_finite_differences() {
        let cfg = tiny_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut policy = ActorCritic::new(&[16], 0.8, &mut rng);
        let batch = random_batch(16, &mut policy, &mut rng);

        let loss = |p: &ActorCritic| -> f64 {
            let mean = p.act_mean(&batch.obs);
            let values = p.values(&batch.obs);
            let lp = p.log_prob(&mean, &batch.actions);
            let n = batch.obs.nrows();
            let nf = n as f32;
            let clip = cfg.clip_range as f32;
            let mut total = 0.0f64;
            for i in 0..n {
                let ratio = (lp[i] - batch.old_log_probs[i]).exp();
                let a = batch.advantages[i];
                let surrogate =
                    (ratio * a).min(ratio.clamp(1.0 - clip, 1.0 + clip) * a);
                total += (-surrogate / nf) as f64;
                let err = values[i] - batch.returns[i];
                total += (cfg.value_loss_coeff as f32 * err * err / nf) as f64;
            }
            total -= (cfg.entropy_coeff as f32 * p.entropy()) as f64;
            total
        };

        policy.zero_grad();
        minibatch_grads(
            &mut policy,
            &batch.obs,
            &batch.actions,
            &batch.old_log_probs,
            &batch.advantages,
            &batch.returns,
            &cfg,
        );

        let h = 1e-3f32;
        // Actor weight.
        for idx in [(0usize, 0usize), (3, 17)] {
            let orig = policy.actor.layers[0].w[idx];
            policy.actor.layers[0].w[idx] = orig + h;
            let lp = loss(&policy);
            policy.actor.layers[0].w[idx] = orig - h;
            let lm = loss(&policy);
            policy.actor.layers[0].w[idx] = orig;
            let fd = ((lp - lm) / (2.0 * h as f64)) as f32;
            let an = policy.actor.layers[0].gw[idx];
            assert!(
                (fd - an).abs() < 5e-3 * (1.0 + fd.abs()),
                "actor {idx:?}: fd {fd} vs {an}"
            );
        }
        // Critic weight.
        let idx = (2usize, 5usize);
        let orig = policy.critic.layers[0].w[idx];
        policy.critic.layers[0].w[idx] = orig + h;
        let lp = loss(&policy);
        policy.critic.layers[0].w[idx] = orig - h;
        let lm = loss(&policy);
        policy.critic.layers[0].w[idx] = orig;
        let fd = ((lp - lm) / (2.0 * h as f64)) as f32;
        let an = policy.critic.layers[0].gw[idx];
        assert!((fd - an).abs() < 5e-3 * (1.0 + fd.abs()), "critic: fd {fd} vs {an}");
        // Log standard deviation.
        for j in [0usize, 7] {
            let orig = policy.log_std[j];
            policy.log_std[j] = orig + h;
            let lp = loss(&policy);
            policy.log_std[j] = orig - h;
            let lm = loss(&policy);
            policy.log_std[j] = orig;
            let fd = ((lp - lm) / (2.0 * h as f64)) as f32;
            let an = policy.g_log_std[j];
            assert!(
                (fd - an).abs() < 5e-3 * (1.0 + fd.abs()),
                "log_std {j}: fd {fd} vs {an}"
            );
        }
    }

    #[test]
    fn update_reduces_value_error_and_adapts_lr() {
        let cfg = PpoConfig {
            hidden: vec![32],
            num_epochs: 5,
            mini_batches: 4,
            ..PpoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut policy = ActorCritic::new(&[32], 1.0, &mut rng);
        let mut lr = 1e-3f64;
        let mut adam_t = 0u64;
        let mut first_vl = None;
        let mut last_vl = 0.0;
        for _ in 0..30 {
            let mut batch = random_batch(64, &mut policy, &mut rng);
            // Fixed value targets keyed to the first obs entry so the critic
            // can actually learn them.
            for i in 0..64 {
                batch.returns[i] = 3.0 * batch.obs[(i, 0)];
            }
            let stats =
                ppo_update(&mut policy, &mut batch, &cfg, &mut lr, &mut adam_t, &mut rng)
                    .unwrap();
            assert!((cfg.min_lr..=cfg.max_lr).contains(&stats.lr));
            first_vl.get_or_insert(stats.value_loss);
            last_vl = stats.value_loss;
        }
        assert!(last_vl < 0.5 * first_vl.unwrap(), "{last_vl} vs {first_vl:?}");
    }

    #[test]
    fn bad_minibatch_split_rejected() {
        let cfg = PpoConfig { mini_batches: 7, hidden: vec![8], ..PpoConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut policy = ActorCritic::new(&[8], 1.0, &mut rng);
        let mut batch = random_batch(16, &mut policy, &mut rng);
        let mut lr = 1e-3;
        let mut t = 0;
        assert!(matches!(
            ppo_update(&mut policy, &mut batch, &cfg, &mut lr, &mut t, &mut rng),
            Err(UpdateError::BadBatchSplit { .. })
        ));
    }
}
