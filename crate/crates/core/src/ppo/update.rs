use rand::seq::SliceRandom;
use rand::Rng;

use super::buffer::Batch;
use super::policy::{gaussian_log_prob, GaussianPolicy};
use super::PpoConfig;
use crate::error::{Error, Result};
use crate::nnet::{AdamConfig, AdamState, ParameterSet};

/// `min(r·A, clip(r, 1−ε, 1+ε)·A)`, the per-sample objective to maximize.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
/// The standard deviation is floored at 1e-8.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    if adv.is_empty() {
        return Vec::new();
    }
    // constant input: rounding in the mean would otherwise be blown up by
    // the std floor
    if adv.iter().all(|&a| a == adv[0]) {
        return vec![0.0; adv.len()];
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    adv.iter().map(|a| (a - mean) / std).collect()
}

/// Optimizer state for the three parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamStates {
    pub actor: AdamState,
    pub log_std: AdamState,
    pub critic: AdamState,
}

impl AdamStates {
    pub fn new(policy: &GaussianPolicy, critic: &ParameterSet, config: AdamConfig) -> Self {
        Self {
            actor: AdamState::new(policy.mean_net.len(), config),
            log_std: AdamState::new(policy.log_std.len(), config),
            critic: AdamState::new(critic.len(), config),
        }
    }
}

/// Minibatch loss gradients plus the diagnostics computed on the way.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub actor: ParameterSet,
    pub log_std: Vec<f64>,
    pub critic: ParameterSet,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

impl Gradients {
    pub fn actor_norm(&self) -> f64 {
        let net = self.actor.l2_norm();
        let ls: f64 = self.log_std.iter().map(|g| g * g).sum();
        (net * net + ls).sqrt()
    }
}

/// Gradients of `−surrogate + value_coef·(v − R)² − entropy_coef·H`,
/// averaged over the samples in `indices`. Advantages are normalized over
/// the same samples.
pub fn loss_gradients(
    policy: &GaussianPolicy,
    critic: &ParameterSet,
    batch: &Batch,
    indices: &[usize],
    config: &PpoConfig,
) -> Result<Gradients> {
    if indices.is_empty() {
        return Err(Error::Shape("empty minibatch".into()));
    }
    let n = indices.len() as f64;
    let adv = normalize_advantages(&indices.iter().map(|&i| batch.advantages[i]).collect::<Vec<_>>());
    let dim = policy.action_dim();
    let inv_var: Vec<f64> = policy.log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();

    let mut g_actor = policy.mean_net.zeros_like();
    let mut g_log_std = vec![0.0; dim];
    let mut g_critic = critic.zeros_like();
    let (mut policy_loss, mut value_loss, mut kl, mut clipped) = (0.0, 0.0, 0.0, 0usize);
    let mut out_grad = vec![0.0; dim];

    for (k, &i) in indices.iter().enumerate() {
        let a = &batch.actions[i];
        let (mean, cache) = policy.mean_with_cache(&batch.obs[i])?;
        let lp = gaussian_log_prob(&mean, &policy.log_std, a);
        let log_ratio = lp - batch.log_probs[i];
        let ratio = log_ratio.exp();
        let surr = clipped_surrogate(ratio, adv[k], config.clip_eps);
        policy_loss -= surr;
        kl += (ratio - 1.0) - log_ratio;

        // the min picks the unclipped branch unless clipping is pessimistic
        let unclipped = ratio * adv[k] <= surr;
        if !unclipped {
            clipped += 1;
        }
        // d(−surr)/d(log π)
        let coef = if unclipped { -adv[k] * ratio / n } else { 0.0 };
        for j in 0..dim {
            let diff = a[j] - mean[j];
            out_grad[j] = coef * diff * inv_var[j] * policy.action_scale[j];
            g_log_std[j] += coef * (diff * diff * inv_var[j] - 1.0);
        }
        if coef != 0.0 {
            policy.mean_net.backward_accumulate(&cache, &out_grad, &mut g_actor)?;
        }

        let (v, vcache) = critic.forward(&batch.obs[i])?;
        let err = v[0] - batch.returns[i];
        value_loss += err * err;
        critic.backward_accumulate(&vcache, &[2.0 * config.value_coef * err / n], &mut g_critic)?;
    }
    for g in &mut g_log_std {
        *g -= config.entropy_coef;
    }

    Ok(Gradients {
        actor: g_actor,
        log_std: g_log_std,
        critic: g_critic,
        policy_loss: policy_loss / n,
        value_loss: value_loss / n,
        entropy: policy.entropy(),
        approx_kl: kl / n,
        clip_fraction: clipped as f64 / n,
    })
}

/// Means over the minibatches of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Pre-clipping gradient norms.
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    pub minibatches: usize,
}

fn scale_to(norm: f64, max: f64) -> f64 {
    if norm > max {
        max / norm
    } else {
        1.0
    }
}

/// `epochs` passes of shuffled minibatches over `batch`.
pub fn update<R: Rng + ?Sized>(
    policy: &mut GaussianPolicy,
    critic: &mut ParameterSet,
    batch: &Batch,
    config: &PpoConfig,
    adam: &mut AdamStates,
    rng: &mut R,
) -> Result<UpdateStats> {
    config.validate()?;
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut stats = UpdateStats::default();
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size) {
            let mut g = loss_gradients(policy, critic, batch, chunk, config)?;
            let loss = g.policy_loss + config.value_coef * g.value_loss
                - config.entropy_coef * g.entropy;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "loss {} (policy {}, value {})",
                    loss, g.policy_loss, g.value_loss
                )));
            }
            let actor_norm = g.actor_norm();
            let critic_norm = g.critic.l2_norm();
            let sa = scale_to(actor_norm, config.max_grad_norm);
            let sc = scale_to(critic_norm, config.max_grad_norm);
            g.actor.as_mut_slice().iter_mut().for_each(|v| *v *= sa);
            g.log_std.iter_mut().for_each(|v| *v *= sa);
            g.critic.as_mut_slice().iter_mut().for_each(|v| *v *= sc);

            adam.actor.step(policy.mean_net.as_mut_slice(), g.actor.as_slice())?;
            adam.log_std.step(&mut policy.log_std, &g.log_std)?;
            adam.critic.step(critic.as_mut_slice(), g.critic.as_slice())?;
            policy.clamp_log_std();

            stats.policy_loss += g.policy_loss;
            stats.value_loss += g.value_loss;
            stats.entropy += g.entropy;
            stats.approx_kl += g.approx_kl;
            stats.clip_fraction += g.clip_fraction;
            stats.actor_grad_norm += actor_norm;
            stats.critic_grad_norm += critic_norm;
            stats.minibatches += 1;
        }
    }
    let m = stats.minibatches as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.approx_kl /= m;
    stats.clip_fraction /= m;
    stats.actor_grad_norm /= m;
    stats.critic_grad_norm /= m;
    Ok(stats)
}
