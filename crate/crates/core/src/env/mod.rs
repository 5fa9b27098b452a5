//! Environment contract shared by the point-mass, stepper and biped tasks.

pub mod biped;
pub mod clock;
pub mod layout;
pub mod pointmass;
pub mod stepper;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use clock::{Clock, Leg};
pub use layout::EnvironmentLayout;

/// Control steps per episode before truncation.
pub const EPISODE_STEPS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TerminationReason {
    Goal,
    Collision,
    Fell,
    Diverged,
}

impl TerminationReason {
    pub fn code(self) -> &'static str {
        match self {
            TerminationReason::Goal => "goal",
            TerminationReason::Collision => "collision",
            TerminationReason::Fell => "fell",
            TerminationReason::Diverged => "diverged",
        }
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepInfo {
    /// Weighted reward contributions; they sum to the step reward.
    pub terms: Vec<(&'static str, f64)>,
    pub reason: Option<TerminationReason>,
    pub collision: bool,
    pub distance_to_goal: f64,
    /// Distance travelled from the episode's start position. Signed forward
    /// progress for the biped.
    pub displacement: f64,
    /// Swing-foot displacement this step (stepper only).
    pub step_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub name: String,
    pub dim: usize,
    /// Multiplier applied to the raw values of this segment.
    pub scale: f64,
}

/// Ordered, named observation segments with fixed scale factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLayout {
    segments: Vec<Segment>,
}

impl ObservationLayout {
    pub fn new(segments: Vec<(&str, usize, f64)>) -> Self {
        Self {
            segments: segments
                .into_iter()
                .map(|(name, dim, scale)| Segment {
                    name: name.to_string(),
                    dim,
                    scale,
                })
                .collect(),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.segments.iter().map(|s| s.dim).sum()
    }

    /// Applies the per-segment scales to raw values listed in segment order.
    pub fn scale(&self, raw: &[f64]) -> Vec<f64> {
        assert_eq!(raw.len(), self.dim(), "raw observation length");
        let mut out = Vec::with_capacity(raw.len());
        let mut i = 0;
        for s in &self.segments {
            for v in &raw[i..i + s.dim] {
                out.push(v * s.scale);
            }
            i += s.dim;
        }
        out
    }

    /// `name:dim:scale` entries joined by `;`.
    pub fn to_text(&self) -> String {
        self.segments
            .iter()
            .map(|s| format!("{}:{}:{}", s.name, s.dim, s.scale))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for part in text.split(';').filter(|p| !p.is_empty()) {
            let fields: Vec<&str> = part.split(':').collect();
            let bad = || Error::Checkpoint(format!("bad layout segment '{}'", part));
            if fields.len() != 3 {
                return Err(bad());
            }
            segments.push(Segment {
                name: fields[0].to_string(),
                dim: fields[1].parse().map_err(|_| bad())?,
                scale: fields[2].parse().map_err(|_| bad())?,
            });
        }
        Ok(Self { segments })
    }
}

/// Gym-style environment. Instances are owned by a single worker.
pub trait Environment: Send {
    fn name(&self) -> &'static str;

    fn observation_layout(&self) -> &ObservationLayout;

    fn action_dim(&self) -> usize;

    /// Names of the reward terms reported in [`StepInfo::terms`], in order.
    fn reward_terms(&self) -> &'static [&'static str];

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> StepResult;

    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    /// Column names for trajectory dumps.
    fn trace_header(&self) -> &'static [&'static str];

    /// Current state as one trajectory-dump row.
    fn trace(&self) -> Vec<f64>;
}

pub(crate) fn check_action(action: &[f64], dim: usize) -> Result<()> {
    if action.len() != dim {
        return Err(Error::Shape(format!(
            "action has length {}, environment expects {}",
            action.len(),
            dim
        )));
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite(format!("action {:?}", action)));
    }
    Ok(())
}

pub(crate) fn clamp_unit(action: &[f64]) -> Vec<f64> {
    action.iter().map(|a| a.clamp(-1.0, 1.0)).collect()
}
