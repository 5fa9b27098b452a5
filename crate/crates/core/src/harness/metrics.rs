//! One CSV row per PPO update.

use std::fmt::Write as _;

use crate::env::TerminationReason;
use crate::ppo::{EpisodeRecord, UpdateStats};

const FIXED_COLUMNS: &[&str] = &[
    "update",
    "env_steps",
    "episodes",
    "return_mean",
    "return_std",
    "length_mean",
    "goal",
    "collision",
    "fell",
    "diverged",
    "timeout",
    "displacement_mean",
    "step_length_mean",
    "policy_loss",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_fraction",
    "actor_grad_norm",
    "critic_grad_norm",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    /// Updates completed, counting this one.
    pub update: u64,
    pub env_steps: u64,
    pub episodes: usize,
    pub return_mean: f64,
    pub return_std: f64,
    pub length_mean: f64,
    /// Episode counts for goal, collision, fell, diverged, timeout.
    pub outcomes: [usize; 5],
    pub displacement_mean: f64,
    pub step_length_mean: f64,
    pub stats: UpdateStats,
    /// Mean per-episode sum of each reward term.
    pub term_means: Vec<f64>,
}

pub fn header(terms: &[&str]) -> String {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend(terms.iter().map(|t| format!("term_{}", t)));
    cols.join(",")
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl MetricsRow {
    /// Aggregates the episodes that finished during one collection phase.
    /// Means over zero episodes are NaN.
    pub fn new(update: u64, env_steps: u64, episodes: &[EpisodeRecord], stats: UpdateStats, n_terms: usize) -> Self {
        let return_mean = mean(episodes.iter().map(|e| e.total_reward));
        let return_std = mean(episodes.iter().map(|e| (e.total_reward - return_mean).powi(2))).sqrt();
        let mut outcomes = [0usize; 5];
        for e in episodes {
            let slot = match e.reason {
                Some(TerminationReason::Goal) => 0,
                Some(TerminationReason::Collision) => 1,
                Some(TerminationReason::Fell) => 2,
                Some(TerminationReason::Diverged) => 3,
                None => 4,
            };
            outcomes[slot] += 1;
        }
        Self {
            update,
            env_steps,
            episodes: episodes.len(),
            return_mean,
            return_std,
            length_mean: mean(episodes.iter().map(|e| e.length as f64)),
            outcomes,
            displacement_mean: mean(episodes.iter().map(|e| e.displacement)),
            step_length_mean: mean(episodes.iter().filter_map(|e| e.mean_step_length)),
            stats,
            term_means: (0..n_terms)
                .map(|k| mean(episodes.iter().map(|e| e.term_sums[k])))
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{}",
            self.update, self.env_steps, self.episodes, self.return_mean, self.return_std, self.length_mean
        )
        .unwrap();
        for c in self.outcomes {
            write!(s, ",{}", c).unwrap();
        }
        let st = &self.stats;
        for v in [
            self.displacement_mean,
            self.step_length_mean,
            st.policy_loss,
            st.value_loss,
            st.entropy,
            st.approx_kl,
            st.clip_fraction,
            st.actor_grad_norm,
            st.critic_grad_norm,
        ]
        .iter()
        .chain(&self.term_means)
        {
            write!(s, ",{}", v).unwrap();
        }
        s
    }
}

/// Column index by name in a metrics header.
pub fn column(header: &str, name: &str) -> Option<usize> {
    header.split(',').position(|c| c == name)
}
