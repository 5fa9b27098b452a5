//! Proximal policy optimization with a diagonal Gaussian policy and a
//! separate critic.

mod buffer;
mod policy;
mod rollout;
mod update;

pub use buffer::{compute_gae, Batch, RolloutBuffer, Transition};
pub use policy::{gaussian_log_prob, GaussianPolicy, LOG_STD_INIT, LOG_STD_MAX, LOG_STD_MIN};
pub use rollout::{collect_parallel, collect_rollout, EpisodeRecord, Rollout};
pub use update::{
    clipped_surrogate, loss_gradients, normalize_advantages, update, AdamStates, Gradients,
    UpdateStats,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    /// Transitions per update, summed over workers.
    pub rollout_horizon: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 4,
            minibatch_size: 256,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            rollout_horizon: 4096,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.rollout_horizon == 0 {
            return bad("epochs, minibatch_size and rollout_horizon must be at least 1");
        }
        if !(self.value_coef >= 0.0) || !(self.entropy_coef >= 0.0) {
            return bad("loss coefficients must be nonnegative");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }
}
