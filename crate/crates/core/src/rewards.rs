//! Composite reward: a clock-gated locomotion part plus exponential distance
//! attractors and repulsors around the destination, the obstacles and the
//! episode's start position.
//!
//! Weights are applied inside each part, so the step reward is the plain sum
//! `locomotion + distance`.

use crate::env::{Clock, Leg};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetKind {
    Destination,
    Obstacle,
    InitialPosition,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Destination => "destination",
            TargetKind::Obstacle => "obstacle",
            TargetKind::InitialPosition => "initial",
        }
    }
}

/// One `weight * exp(-k * d)` term of the distance reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceTarget {
    pub position: [f64; 2],
    /// Decay rate in 1/m.
    pub k: f64,
    /// Positive attracts, negative repels.
    pub weight: f64,
    pub kind: TargetKind,
}

impl DistanceTarget {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!(
                "{} target needs k > 0, got {}",
                self.kind.name(),
                self.k
            )));
        }
        if !self.weight.is_finite() || !self.position.iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!("{} target is not finite", self.kind.name())));
        }
        // zero weight disables a target (ablations); otherwise the sign is fixed
        let sign_ok = match self.kind {
            TargetKind::Destination => self.weight >= 0.0,
            TargetKind::Obstacle | TargetKind::InitialPosition => self.weight <= 0.0,
        };
        if !sign_ok {
            return Err(Error::Config(format!(
                "{} weight has the wrong sign: {}",
                self.kind.name(),
                self.weight
            )));
        }
        Ok(())
    }
}

/// Signed weights of the distance terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceWeights {
    pub destination: f64,
    pub obstacle: f64,
    pub initial: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        Self {
            destination: 0.95,
            obstacle: -0.2,
            initial: -0.5,
        }
    }
}

/// Decay rates of the distance terms, 1/m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceGains {
    pub destination: f64,
    pub obstacle: f64,
    pub initial: f64,
}

impl Default for DistanceGains {
    fn default() -> Self {
        Self {
            destination: 0.3,
            obstacle: 1.5,
            initial: 1.0,
        }
    }
}

/// `exp(-k * ||base - target||)` over the x-y plane.
pub fn distance_term(base_xy: [f64; 2], target: &DistanceTarget) -> f64 {
    let dx = base_xy[0] - target.position[0];
    let dy = base_xy[1] - target.position[1];
    (-target.k * dx.hypot(dy)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReward {
    pub total: f64,
    /// Weighted contribution of each target, aligned with the input slice.
    pub per_target: Vec<f64>,
}

impl DistanceReward {
    /// Contribution summed over all targets of one kind.
    pub fn sum_of(&self, targets: &[DistanceTarget], kind: TargetKind) -> f64 {
        targets
            .iter()
            .zip(&self.per_target)
            .filter(|(t, _)| t.kind == kind)
            .map(|(_, v)| v)
            .sum()
    }
}

pub fn distance_reward(base_xy: [f64; 2], targets: &[DistanceTarget]) -> DistanceReward {
    let per_target: Vec<f64> = targets
        .iter()
        .map(|t| t.weight * distance_term(base_xy, t))
        .collect();
    DistanceReward {
        total: per_target.iter().sum(),
        per_target,
    }
}

/// Nonnegative weights of the seven locomotion terms. Penalty weights multiply
/// negative term values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocomotionWeights {
    pub foot_force: f64,
    pub foot_speed: f64,
    pub upright: f64,
    pub height: f64,
    pub velocity: f64,
    pub torque: f64,
    pub action_rate: f64,
}

impl Default for LocomotionWeights {
    fn default() -> Self {
        Self {
            foot_force: 0.15,
            foot_speed: 0.15,
            upright: 0.15,
            height: 0.15,
            velocity: 0.15,
            torque: 0.05,
            action_rate: 0.05,
        }
    }
}

impl LocomotionWeights {
    pub fn zero() -> Self {
        Self {
            foot_force: 0.0,
            foot_speed: 0.0,
            upright: 0.0,
            height: 0.0,
            velocity: 0.0,
            torque: 0.0,
            action_rate: 0.0,
        }
    }

    pub fn positive_sum(&self) -> f64 {
        self.foot_force + self.foot_speed + self.upright + self.height + self.velocity
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.foot_force,
            self.foot_speed,
            self.upright,
            self.height,
            self.velocity,
            self.torque,
            self.action_rate,
        ];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("locomotion weights must be >= 0: {:?}", self)))
        }
    }
}

/// Shape constants of the locomotion terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocomotionCoefficients {
    /// 1/rad²
    pub upright: f64,
    /// 1/m²
    pub height: f64,
    /// s²/m²
    pub velocity: f64,
    /// 1/(N·m)²
    pub torque: f64,
    pub action_rate: f64,
    /// Contact force counted as full support, N.
    pub force_ref: f64,
    /// Foot speed counted as a full swing, m/s.
    pub speed_ref: f64,
}

impl Default for LocomotionCoefficients {
    fn default() -> Self {
        Self {
            upright: 10.0,
            height: 50.0,
            velocity: 4.0,
            torque: 1e-4,
            action_rate: 0.5,
            force_ref: 100.0,
            speed_ref: 0.3,
        }
    }
}

/// Snapshot of the quantities the locomotion terms read.
#[derive(Debug, Clone, PartialEq)]
pub struct LocomotionState {
    /// rad
    pub orientation_error: f64,
    /// m
    pub height_error: f64,
    /// m/s, x-y
    pub base_velocity: [f64; 2],
    /// Commanded velocity, m/s, x-y.
    pub velocity_command: [f64; 2],
    /// Normal contact force per foot (left, right), N.
    pub contact_force: [f64; 2],
    /// Horizontal speed per foot (left, right), m/s.
    pub foot_speed: [f64; 2],
    pub torques: Vec<f64>,
    pub previous_action: Vec<f64>,
    pub action: Vec<f64>,
}

pub const LOCOMOTION_TERMS: [&str; 7] = [
    "foot_force",
    "foot_speed",
    "upright",
    "height",
    "velocity",
    "torque",
    "action_rate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LocomotionReward {
    pub total: f64,
    /// Weighted term values in [`LOCOMOTION_TERMS`] order.
    pub per_term: [f64; 7],
}

/// Clock-gated weighted sum of the seven locomotion terms.
pub fn locomotion_reward(
    state: &LocomotionState,
    clock: &Clock,
    weights: &LocomotionWeights,
    coeffs: &LocomotionCoefficients,
) -> LocomotionReward {
    let mut force_term = 0.0;
    let mut speed_term = 0.0;
    for leg in Leg::BOTH {
        let s = clock.stance(leg);
        let i = leg.index();
        let contact = (state.contact_force[i].max(0.0) / coeffs.force_ref).min(1.0);
        let moving = (state.foot_speed[i].abs() / coeffs.speed_ref).min(1.0);
        // stance wants load and a planted foot; swing wants the opposite
        force_term += 0.5 * (s * contact + (1.0 - s) * (1.0 - contact));
        speed_term += 0.5 * (s * (1.0 - moving) + (1.0 - s) * moving);
    }

    let upright = (-coeffs.upright * state.orientation_error.powi(2)).exp();
    let height = (-coeffs.height * state.height_error.powi(2)).exp();
    let dvx = state.base_velocity[0] - state.velocity_command[0];
    let dvy = state.base_velocity[1] - state.velocity_command[1];
    let velocity = (-coeffs.velocity * (dvx * dvx + dvy * dvy)).exp();
    let torque = -coeffs.torque * state.torques.iter().map(|t| t * t).sum::<f64>();
    let action_rate = -coeffs.action_rate
        * state
            .action
            .iter()
            .zip(&state.previous_action)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();

    let per_term = [
        weights.foot_force * force_term,
        weights.foot_speed * speed_term,
        weights.upright * upright,
        weights.height * height,
        weights.velocity * velocity,
        weights.torque * torque,
        weights.action_rate * action_rate,
    ];
    LocomotionReward {
        total: per_term.iter().sum(),
        per_term,
    }
}

pub fn total_reward(locomotion: f64, distance: f64) -> f64 {
    locomotion + distance
}
