use std::fmt::Write as _;
use std::io::Write;

use super::checkpoint::Checkpoint;
use crate::env::{Environment, EnvironmentLayout, TerminationReason};
use crate::error::{Error, Result};
use crate::ppo::GaussianPolicy;
use crate::rng::{stream, Purpose};

/// Aggregate outcome of a batch of evaluation episodes. Every episode lands
/// in exactly one of success, collision, fall (including numerical
/// divergence) and timeout.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub episodes: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub fall_rate: f64,
    pub timeout_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
    pub mean_final_distance: f64,
    pub mean_displacement: f64,
    /// Mean swing-foot displacement over the steps of episodes that reached
    /// the goal or timed out; `None` when there are no such footsteps.
    pub mean_step_length: Option<f64>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{} = {}", k, v).unwrap();
        kv("episodes", self.episodes.to_string());
        kv("success_rate", self.success_rate.to_string());
        kv("collision_rate", self.collision_rate.to_string());
        kv("fall_rate", self.fall_rate.to_string());
        kv("timeout_rate", self.timeout_rate.to_string());
        kv("mean_return", self.mean_return.to_string());
        kv("mean_length", self.mean_length.to_string());
        kv("mean_final_distance", self.mean_final_distance.to_string());
        kv("mean_displacement", self.mean_displacement.to_string());
        if let Some(l) = self.mean_step_length {
            kv("mean_step_length", l.to_string());
        }
        s
    }
}

/// Runs `episodes` episodes. Episode `i` draws its reset (and, when
/// stochastic, its actions) from the evaluation stream `(seed, i)`, so
/// reports are reproducible and comparable across layouts.
pub fn evaluate(
    env: &mut dyn Environment,
    policy: &GaussianPolicy,
    episodes: usize,
    deterministic: bool,
    seed: u64,
    mut trace: Option<&mut dyn Write>,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    if env.observation_layout().dim() != policy.obs_dim() || env.action_dim() != policy.action_dim() {
        return Err(Error::Incompatible("policy and environment dimensions differ".into()));
    }
    let io = |e| Error::io("trajectory dump", e);
    if let Some(w) = trace.as_mut() {
        writeln!(w, "episode,{}", env.trace_header().join(",")).map_err(io)?;
    }
    let mut counts = [0usize; 4];
    let (mut ret, mut len, mut dist, mut disp) = (0.0, 0.0, 0.0, 0.0);
    let (mut step_sum, mut step_n) = (0.0, 0usize);
    for ep in 0..episodes {
        let mut rng = stream(seed, Purpose::Eval, 0, ep as u64);
        let mut r = env.reset(&mut rng);
        let mut total = 0.0;
        let mut steps = 0usize;
        let (mut ep_step_sum, mut ep_step_n) = (0.0, 0usize);
        loop {
            if let Some(w) = trace.as_mut() {
                let row: Vec<String> = env.trace().iter().map(|v| v.to_string()).collect();
                writeln!(w, "{},{}", ep, row.join(",")).map_err(io)?;
            }
            let action = if deterministic {
                policy.mean(&r.obs)?
            } else {
                policy.sample_action(&r.obs, &mut rng)?.0
            };
            r = env.step(&action)?;
            total += r.reward;
            steps += 1;
            if let Some(s) = r.info.step_length {
                ep_step_sum += s;
                ep_step_n += 1;
            }
            if r.done() {
                break;
            }
        }
        if let Some(w) = trace.as_mut() {
            let row: Vec<String> = env.trace().iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", ep, row.join(",")).map_err(io)?;
        }
        let slot = match r.info.reason {
            Some(TerminationReason::Goal) => 0,
            Some(TerminationReason::Collision) => 1,
            Some(TerminationReason::Fell) | Some(TerminationReason::Diverged) => 2,
            None => 3,
        };
        counts[slot] += 1;
        if slot == 0 || slot == 3 {
            step_sum += ep_step_sum;
            step_n += ep_step_n;
        }
        ret += total;
        len += steps as f64;
        dist += r.info.distance_to_goal;
        disp += r.info.displacement;
    }
    let n = episodes as f64;
    Ok(EvalReport {
        episodes,
        success_rate: counts[0] as f64 / n,
        collision_rate: counts[1] as f64 / n,
        fall_rate: counts[2] as f64 / n,
        timeout_rate: counts[3] as f64 / n,
        mean_return: ret / n,
        mean_length: len / n,
        mean_final_distance: dist / n,
        mean_displacement: disp / n,
        mean_step_length: (step_n > 0).then(|| step_sum / step_n as f64),
    })
}

/// Evaluates a checkpoint's policy on `layout`, rejecting layouts whose
/// observation shape differs from the training one.
pub fn evaluate_checkpoint(
    ck: &Checkpoint,
    layout: &EnvironmentLayout,
    episodes: usize,
    deterministic: bool,
    trace: Option<&mut dyn Write>,
) -> Result<EvalReport> {
    let mut env = ck.config.make_env(layout)?;
    ck.check_compatible(env.observation_layout(), env.action_dim())?;
    evaluate(env.as_mut(), &ck.policy, episodes, deterministic, ck.seed, trace)
}
