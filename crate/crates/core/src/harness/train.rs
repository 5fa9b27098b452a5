use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::checkpoint::Checkpoint;
use super::config::ExperimentConfig;
use super::metrics::{header, MetricsRow};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::nnet::{init_params, ParameterSet};
use crate::ppo::{collect_parallel, update, AdamStates, Batch, GaussianPolicy};
use crate::rng::{derive_seed, stream, Purpose};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CHECKPOINT_TEXT_FILE: &str = "checkpoint.txt";

/// Learner state plus one environment per worker.
pub struct Trainer {
    config: ExperimentConfig,
    envs: Vec<Box<dyn Environment>>,
    policy: GaussianPolicy,
    critic: ParameterSet,
    adam: AdamStates,
    updates: u64,
    env_steps: u64,
}

/// Settings that must agree between a checkpoint and the config resuming it.
fn run_identity(c: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        total_steps: 0,
        eval_episodes: 0,
        checkpoint_every: 0,
        output_dir: PathBuf::new(),
        ..c.clone()
    }
}

impl Trainer {
    pub fn new(config: &ExperimentConfig, resume: Option<Checkpoint>) -> Result<Self> {
        config.validate()?;
        let course = config.course()?;
        let envs = (0..config.workers)
            .map(|_| config.make_env(&course))
            .collect::<Result<Vec<_>>>()?;
        let obs_dim = envs[0].observation_layout().dim();
        let act_dim = envs[0].action_dim();
        let mut t = match resume {
            Some(ck) => {
                if run_identity(&ck.config) != run_identity(config) {
                    return Err(Error::Incompatible(
                        "checkpoint was written by a run with different settings".into(),
                    ));
                }
                ck.check_compatible(envs[0].observation_layout(), act_dim)?;
                Self {
                    config: config.clone(),
                    envs,
                    policy: ck.policy,
                    critic: ck.critic,
                    adam: ck.adam,
                    updates: ck.updates,
                    env_steps: ck.env_steps,
                }
            }
            None => {
                let policy = GaussianPolicy::new(
                    config.actor_spec(obs_dim, act_dim)?,
                    derive_seed(config.seed, Purpose::Init, 0),
                );
                let critic = init_params(
                    &config.critic_spec(obs_dim)?,
                    derive_seed(config.seed, Purpose::Init, 1),
                );
                let adam = AdamStates::new(&policy, &critic, config.adam());
                Self {
                    config: config.clone(),
                    envs,
                    policy,
                    critic,
                    adam,
                    updates: 0,
                    env_steps: 0,
                }
            }
        };
        t.config = config.clone();
        Ok(t)
    }

    pub fn reward_terms(&self) -> &'static [&'static str] {
        self.envs[0].reward_terms()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }

    pub fn critic(&self) -> &ParameterSet {
        &self.critic
    }

    pub fn is_done(&self) -> bool {
        self.updates >= self.config.total_updates()
    }

    /// One collection phase followed by one PPO update.
    pub fn step(&mut self) -> Result<MetricsRow> {
        let c = &self.config;
        let rollouts = collect_parallel(
            &mut self.envs,
            &self.policy,
            &self.critic,
            c.horizon_per_worker(),
            c.seed,
            self.updates,
        )?;
        let buffers: Vec<_> = rollouts.iter().map(|r| r.buffer.clone()).collect();
        let batch = Batch::from_buffers(&buffers, c.ppo.gamma, c.ppo.gae_lambda)?;
        let mut rng = stream(c.seed, Purpose::Shuffle, self.updates, 0);
        let stats = update(&mut self.policy, &mut self.critic, &batch, &c.ppo, &mut self.adam, &mut rng)?;
        let finite = self.policy.mean_net.as_slice().iter().all(|v| v.is_finite())
            && self.critic.as_slice().iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Divergence(format!("non-finite parameters after update {}", self.updates + 1)));
        }
        self.updates += 1;
        self.env_steps += batch.len() as u64;
        let episodes: Vec<_> = rollouts.into_iter().flat_map(|r| r.episodes).collect();
        Ok(MetricsRow::new(
            self.updates,
            self.env_steps,
            &episodes,
            stats,
            self.reward_terms().len(),
        ))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            obs_layout: self.envs[0].observation_layout().clone(),
            policy: self.policy.clone(),
            critic: self.critic.clone(),
            adam: self.adam.clone(),
            seed: self.config.seed,
            updates: self.updates,
            env_steps: self.env_steps,
        }
    }
}

/// Prepares the metrics file: fresh runs get a header, resumed runs keep the
/// rows up to the checkpoint so the file matches a straight-through run.
fn open_metrics(path: &Path, head: &str, resume_updates: Option<u64>) -> Result<fs::File> {
    let mut text = format!("{}\n", head);
    if let Some(done) = resume_updates {
        if let Ok(old) = fs::read_to_string(path) {
            let mut lines = old.lines();
            if lines.next() != Some(head) {
                return Err(Error::Incompatible(format!("{} has a different header", path.display())));
            }
            for line in lines {
                let update: u64 = line
                    .split(',')
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Checkpoint(format!("bad metrics row '{}'", line)))?;
                if update <= done {
                    text.push_str(line);
                    text.push('\n');
                }
            }
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub rows: Vec<MetricsRow>,
}

/// Runs PPO until the step budget is used up, writing metrics and
/// checkpoints under the output directory.
pub fn train(config: &ExperimentConfig, resume: Option<Checkpoint>) -> Result<TrainOutcome> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let resume_updates = resume.as_ref().map(|c| c.updates);
    let mut trainer = Trainer::new(config, resume)?;
    let metrics_path = dir.join(METRICS_FILE);
    let mut metrics = open_metrics(&metrics_path, &header(trainer.reward_terms()), resume_updates)?;
    let ck_path = dir.join(CHECKPOINT_FILE);

    let mut rows = Vec::new();
    while !trainer.is_done() {
        let row = trainer.step()?;
        writeln!(metrics, "{}", row.to_csv()).map_err(|e| Error::io(&metrics_path, e))?;
        rows.push(row);
        if config.checkpoint_every > 0 && trainer.updates() % config.checkpoint_every == 0 {
            trainer.checkpoint().save(&ck_path)?;
        }
    }
    let checkpoint = trainer.checkpoint();
    checkpoint.save(&ck_path)?;
    let text_path = dir.join(CHECKPOINT_TEXT_FILE);
    fs::write(&text_path, checkpoint.to_text()).map_err(|e| Error::io(&text_path, e))?;
    Ok(TrainOutcome { checkpoint, rows })
}
