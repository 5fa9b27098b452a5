use rand_chacha::ChaCha8Rng;

use super::buffer::{RolloutBuffer, Transition};
use super::policy::GaussianPolicy;
use crate::env::{Environment, StepResult, TerminationReason};
use crate::error::{Error, Result};
use crate::nnet::ParameterSet;
use crate::rng::{stream, Purpose};

/// Summary of one finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub total_reward: f64,
    pub length: usize,
    /// `None` when the episode hit the step cap.
    pub reason: Option<TerminationReason>,
    pub displacement: f64,
    pub final_distance: f64,
    /// Per reward term sums, in the environment's term order.
    pub term_sums: Vec<f64>,
    /// Mean swing-foot displacement, for environments that report one.
    pub mean_step_length: Option<f64>,
}

#[derive(Default)]
struct EpisodeAccumulator {
    total: f64,
    length: usize,
    terms: Vec<f64>,
    step_sum: f64,
    step_count: usize,
}

impl EpisodeAccumulator {
    fn new(terms: usize) -> Self {
        Self {
            terms: vec![0.0; terms],
            ..Self::default()
        }
    }

    fn add(&mut self, r: &StepResult) {
        self.total += r.reward;
        self.length += 1;
        for (acc, (_, v)) in self.terms.iter_mut().zip(&r.info.terms) {
            *acc += v;
        }
        if let Some(s) = r.info.step_length {
            self.step_sum += s;
            self.step_count += 1;
        }
    }

    fn finish(self, last: &StepResult) -> EpisodeRecord {
        EpisodeRecord {
            total_reward: self.total,
            length: self.length,
            reason: last.info.reason,
            displacement: last.info.displacement,
            final_distance: last.info.distance_to_goal,
            term_sums: self.terms,
            mean_step_length: (self.step_count > 0).then(|| self.step_sum / self.step_count as f64),
        }
    }
}

/// Result of one collection phase on one environment instance.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub buffer: RolloutBuffer,
    /// Episodes that ended inside the phase. The episode still running at
    /// the end of the phase is not included.
    pub episodes: Vec<EpisodeRecord>,
}

fn value(critic: &ParameterSet, obs: &[f64]) -> Result<f64> {
    let v = critic.predict(obs)?[0];
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Divergence(format!("critic value {}", v)))
    }
}

/// Resets `env` and steps it `horizon` times under `policy`, resetting again
/// after each episode.
pub fn collect_rollout(
    env: &mut dyn Environment,
    policy: &GaussianPolicy,
    critic: &ParameterSet,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Rollout> {
    let mut buffer = RolloutBuffer::new(horizon);
    let mut episodes = Vec::new();
    let n_terms = env.reward_terms().len();
    let mut obs = env.reset(rng).obs;
    let mut acc = EpisodeAccumulator::new(n_terms);
    for _ in 0..horizon {
        let v = value(critic, &obs)?;
        let (action, log_prob) = policy.sample_action(&obs, rng)?;
        let r = env.step(&action)?;
        let truncation_value = if r.truncated && !r.terminated {
            value(critic, &r.obs)?
        } else {
            0.0
        };
        acc.add(&r);
        let done = r.done();
        buffer.push(Transition {
            obs: std::mem::take(&mut obs),
            action,
            log_prob,
            reward: r.reward,
            value: v,
            terminated: r.terminated,
            truncated: r.truncated,
            truncation_value,
        })?;
        if done {
            let finished = std::mem::replace(&mut acc, EpisodeAccumulator::new(n_terms));
            episodes.push(finished.finish(&r));
            obs = env.reset(rng).obs;
        } else {
            obs = r.obs;
        }
    }
    buffer.bootstrap_value = Some(value(critic, &obs)?);
    Ok(Rollout { buffer, episodes })
}

/// One collection phase on every environment, in parallel. Worker `i` draws
/// from the rollout stream `(seed, counter, i)`, and results come back in
/// worker order, so the outcome does not depend on thread scheduling.
pub fn collect_parallel(
    envs: &mut [Box<dyn Environment>],
    policy: &GaussianPolicy,
    critic: &ParameterSet,
    horizon_per_worker: usize,
    seed: u64,
    counter: u64,
) -> Result<Vec<Rollout>> {
    let run = |i: usize, env: &mut Box<dyn Environment>| {
        let mut rng = stream(seed, Purpose::Rollout, counter, i as u64);
        collect_rollout(env.as_mut(), policy, critic, horizon_per_worker, &mut rng)
    };
    if envs.len() == 1 {
        return Ok(vec![run(0, &mut envs[0])?]);
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = envs
            .iter_mut()
            .enumerate()
            .map(|(i, env)| s.spawn(move || run(i, env)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rollout worker panicked"))
            .collect()
    })
}
