//! Experiment configuration: a line-based `key = value` file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::env::biped::{BipedConfig, BipedEnv, BipedModel};
use crate::env::pointmass::{PointMassConfig, PointMassEnv};
use crate::env::stepper::{StepperConfig, StepperEnv};
use crate::env::{Environment, EnvironmentLayout};
use crate::error::{Error, Result};
use crate::nnet::{AdamConfig, MlpSpec};
use crate::ppo::PpoConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    PointMass,
    Stepper,
    Biped,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::PointMass => "pointmass",
            EnvKind::Stepper => "stepper",
            EnvKind::Biped => "biped",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "pointmass" => Some(EnvKind::PointMass),
            "stepper" => Some(EnvKind::Stepper),
            "biped" => Some(EnvKind::Biped),
            _ => None,
        }
    }
}

/// Optional per-kind overrides of the layout's distance weights and gains.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardOverrides {
    pub w_destination: Option<f64>,
    pub w_obstacle: Option<f64>,
    pub w_initial: Option<f64>,
    pub k_destination: Option<f64>,
    pub k_obstacle: Option<f64>,
    pub k_initial: Option<f64>,
}

impl RewardOverrides {
    pub fn apply(&self, layout: &mut EnvironmentLayout) {
        let pairs = [
            (self.w_destination, &mut layout.weights.destination),
            (self.w_obstacle, &mut layout.weights.obstacle),
            (self.w_initial, &mut layout.weights.initial),
            (self.k_destination, &mut layout.gains.destination),
            (self.k_obstacle, &mut layout.gains.obstacle),
            (self.k_initial, &mut layout.gains.initial),
        ];
        for (v, slot) in pairs {
            if let Some(v) = v {
                *slot = v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    /// Course file for the navigation environments; the shipped four-obstacle
    /// course when absent.
    pub layout: Option<PathBuf>,
    /// Biped model file; built-in parameters when absent.
    pub model: Option<PathBuf>,
    pub ppo: PpoConfig,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub rewards: RewardOverrides,
    /// Reset noise override (position jitter or joint noise, per environment).
    pub reset_noise: Option<f64>,
    pub total_steps: u64,
    pub seed: u64,
    pub workers: usize,
    pub eval_episodes: usize,
    pub output_dir: PathBuf,
    /// Updates between checkpoints; 0 saves only at the end.
    pub checkpoint_every: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::PointMass,
            layout: None,
            model: None,
            ppo: PpoConfig::default(),
            learning_rate: AdamConfig::default().lr,
            hidden: vec![256, 256],
            rewards: RewardOverrides::default(),
            reset_noise: None,
            total_steps: 2_000_000,
            seed: 0,
            workers: 1,
            eval_episodes: 100,
            output_dir: PathBuf::from("runs/default"),
            checkpoint_every: 10,
        }
    }
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Option<Vec<T>> {
    v.split(',').map(|t| t.trim().parse().ok()).collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // relative paths are relative to the config file
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.layout, &mut cfg.model].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: idx + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{}'", line)))?;
            let (key, v) = (key.trim(), value.trim());
            let bad = || err(format!("bad value '{}' for '{}'", v, key));
            let f = || v.parse::<f64>().map_err(|_| bad());
            let u = || v.parse::<u64>().map_err(|_| bad());
            match key {
                "env" => c.env = EnvKind::from_name(v).ok_or_else(bad)?,
                "layout" => c.layout = Some(PathBuf::from(v)),
                "model" => c.model = Some(PathBuf::from(v)),
                "hidden" => c.hidden = parse_list(v).ok_or_else(bad)?,
                "gamma" => c.ppo.gamma = f()?,
                "gae_lambda" => c.ppo.gae_lambda = f()?,
                "clip_eps" => c.ppo.clip_eps = f()?,
                "epochs" => c.ppo.epochs = u()? as usize,
                "minibatch_size" => c.ppo.minibatch_size = u()? as usize,
                "value_coef" => c.ppo.value_coef = f()?,
                "entropy_coef" => c.ppo.entropy_coef = f()?,
                "max_grad_norm" => c.ppo.max_grad_norm = f()?,
                "rollout_horizon" => c.ppo.rollout_horizon = u()? as usize,
                "learning_rate" => c.learning_rate = f()?,
                "w_destination" => c.rewards.w_destination = Some(f()?),
                "w_obstacle" => c.rewards.w_obstacle = Some(f()?),
                "w_initial" => c.rewards.w_initial = Some(f()?),
                "k_destination" => c.rewards.k_destination = Some(f()?),
                "k_obstacle" => c.rewards.k_obstacle = Some(f()?),
                "k_initial" => c.rewards.k_initial = Some(f()?),
                "reset_noise" => c.reset_noise = Some(f()?),
                "total_steps" => c.total_steps = u()?,
                "seed" => c.seed = u()?,
                "workers" => c.workers = u()? as usize,
                "eval_episodes" => c.eval_episodes = u()? as usize,
                "output_dir" => c.output_dir = PathBuf::from(v),
                "checkpoint_every" => c.checkpoint_every = u()?,
                _ => return Err(err(format!("unknown key '{}'", key))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        AdamConfig {
            lr: self.learning_rate,
            ..AdamConfig::default()
        }
        .validate()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if self.workers == 0 || self.workers > 256 {
            return Err(Error::Config("workers must lie in 1..=256".into()));
        }
        if self.reset_noise.is_some_and(|n| !(n >= 0.0 && n.is_finite())) {
            return Err(Error::Config("reset_noise must be nonnegative".into()));
        }
        Ok(())
    }

    /// Canonical text; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.ppo;
        let mut kv = |k: &str, v: String| writeln!(s, "{} = {}", k, v).unwrap();
        kv("env", self.env.name().into());
        if let Some(l) = &self.layout {
            kv("layout", l.display().to_string());
        }
        if let Some(m) = &self.model {
            kv("model", m.display().to_string());
        }
        kv(
            "hidden",
            self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
        );
        kv("gamma", p.gamma.to_string());
        kv("gae_lambda", p.gae_lambda.to_string());
        kv("clip_eps", p.clip_eps.to_string());
        kv("epochs", p.epochs.to_string());
        kv("minibatch_size", p.minibatch_size.to_string());
        kv("value_coef", p.value_coef.to_string());
        kv("entropy_coef", p.entropy_coef.to_string());
        kv("max_grad_norm", p.max_grad_norm.to_string());
        kv("rollout_horizon", p.rollout_horizon.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        let r = &self.rewards;
        for (k, v) in [
            ("w_destination", r.w_destination),
            ("w_obstacle", r.w_obstacle),
            ("w_initial", r.w_initial),
            ("k_destination", r.k_destination),
            ("k_obstacle", r.k_obstacle),
            ("k_initial", r.k_initial),
            ("reset_noise", self.reset_noise),
        ] {
            if let Some(v) = v {
                kv(k, v.to_string());
            }
        }
        kv("total_steps", self.total_steps.to_string());
        kv("seed", self.seed.to_string());
        kv("workers", self.workers.to_string());
        kv("eval_episodes", self.eval_episodes.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        s
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    /// Transitions collected by each worker per update.
    pub fn horizon_per_worker(&self) -> usize {
        self.ppo.rollout_horizon.div_ceil(self.workers)
    }

    pub fn steps_per_update(&self) -> u64 {
        (self.horizon_per_worker() * self.workers) as u64
    }

    pub fn total_updates(&self) -> u64 {
        self.total_steps / self.steps_per_update()
    }

    /// The course with reward overrides applied.
    pub fn course(&self) -> Result<EnvironmentLayout> {
        let mut layout = match &self.layout {
            Some(p) => EnvironmentLayout::load(p)?,
            None => EnvironmentLayout::default(),
        };
        self.rewards.apply(&mut layout);
        layout.validate()?;
        Ok(layout)
    }

    /// Builds the configured environment on `layout` (ignored by the biped,
    /// whose course is fixed).
    pub fn make_env(&self, layout: &EnvironmentLayout) -> Result<Box<dyn Environment>> {
        let mut layout = layout.clone();
        self.rewards.apply(&mut layout);
        Ok(match self.env {
            EnvKind::PointMass => {
                let mut c = PointMassConfig::default();
                if let Some(n) = self.reset_noise {
                    c.jitter = n;
                }
                Box::new(PointMassEnv::new(layout, c)?)
            }
            EnvKind::Stepper => {
                let mut c = StepperConfig::default();
                if let Some(n) = self.reset_noise {
                    c.jitter = n;
                }
                Box::new(StepperEnv::new(layout, c)?)
            }
            EnvKind::Biped => {
                let mut c = BipedConfig::default();
                if let Some(p) = &self.model {
                    c.model = BipedModel::load(p)?;
                }
                if let Some(n) = self.reset_noise {
                    c.reset_noise = n;
                }
                if let Some(w) = self.rewards.w_destination {
                    c.destination_weight = w;
                }
                if let Some(k) = self.rewards.k_destination {
                    c.destination_k = k;
                }
                Box::new(BipedEnv::new(c)?)
            }
        })
    }

    pub fn actor_spec(&self, obs_dim: usize, action_dim: usize) -> Result<MlpSpec> {
        MlpSpec::actor(obs_dim, &self.hidden, action_dim)
    }

    pub fn critic_spec(&self, obs_dim: usize) -> Result<MlpSpec> {
        MlpSpec::critic(obs_dim, &self.hidden)
    }
}
