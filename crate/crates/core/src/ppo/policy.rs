use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nnet::{init_params, ForwardCache, MlpSpec, ParameterSet};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;
pub const LOG_STD_INIT: f64 = -0.7;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log density of `action` under `N(mean, diag(exp(log_std))²)`.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Diagonal Gaussian around a tanh-bounded mean network, with a
/// state-independent learnable log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: ParameterSet,
    pub log_std: Vec<f64>,
    /// Per-dimension multiplier on the tanh output.
    pub action_scale: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(spec: MlpSpec, seed: u64) -> Self {
        let dim = spec.output_dim();
        Self {
            mean_net: init_params(&spec, seed),
            log_std: vec![LOG_STD_INIT; dim],
            action_scale: vec![1.0; dim],
        }
    }

    pub fn from_parts(mean_net: ParameterSet, log_std: Vec<f64>) -> Result<Self> {
        let dim = mean_net.spec().output_dim();
        if log_std.len() != dim {
            return Err(Error::Shape(format!(
                "log_std has {} entries, policy outputs {}",
                log_std.len(),
                dim
            )));
        }
        let mut p = Self {
            mean_net,
            log_std,
            action_scale: vec![1.0; dim],
        };
        p.clamp_log_std();
        Ok(p)
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.spec().input_dim()
    }

    pub fn clamp_log_std(&mut self) {
        for v in &mut self.log_std {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mean_with_cache(obs)?.0)
    }

    pub(crate) fn mean_with_cache(&self, obs: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let (mut out, cache) = self.mean_net.forward(obs)?;
        for (o, s) in out.iter_mut().zip(&self.action_scale) {
            *o *= s;
        }
        Ok((out, cache))
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        Ok(gaussian_log_prob(&self.mean(obs)?, &self.log_std, action))
    }

    /// Differential entropy of the action distribution.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (LN_2PI + 1.0)).sum()
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &ls)| {
                let z: f64 = rng.sample(StandardNormal);
                m + ls.exp() * z
            })
            .collect();
        let lp = gaussian_log_prob(&mean, &self.log_std, &action);
        Ok((action, lp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy() -> GaussianPolicy {
        GaussianPolicy::new(MlpSpec::actor(3, &[8], 2).unwrap(), 4)
    }

    #[test]
    fn log_prob_matches_density_formula() {
        let p = policy();
        let obs = [0.3, -0.2, 0.9];
        let (a, lp) = p.sample_action(&obs, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mean = p.mean(&obs).unwrap();
        let mut density = 1.0;
        for j in 0..2 {
            let s = p.log_std[j].exp();
            density *= (-(a[j] - mean[j]).powi(2) / (2.0 * s * s)).exp()
                / (s * (2.0 * std::f64::consts::PI).sqrt());
        }
        assert!((lp - density.ln()).abs() < 1e-12);
    }

    #[test]
    fn narrow_policy_samples_near_mean() {
        let mut p = policy();
        p.log_std = vec![-50.0; 2];
        p.clamp_log_std();
        assert_eq!(p.log_std, vec![LOG_STD_MIN; 2]);
        let obs = [0.1, 0.2, 0.3];
        let mean = p.mean(&obs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tol = 4.0 * LOG_STD_MIN.exp();
        let inside = (0..10_000)
            .filter(|_| {
                let (a, _) = p.sample_action(&obs, &mut rng).unwrap();
                a.iter().zip(&mean).all(|(x, m)| (x - m).abs() < tol)
            })
            .count();
        assert!(inside >= 9_980, "{}", inside);
    }

    #[test]
    fn sampling_is_seeded() {
        let p = policy();
        let obs = [0.5, 0.5, 0.5];
        let a = p.sample_action(&obs, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = p.sample_action(&obs, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn obs_shape_checked() {
        assert!(policy().mean(&[1.0]).is_err());
        assert!(GaussianPolicy::from_parts(policy().mean_net, vec![0.0]).is_err());
    }
}
