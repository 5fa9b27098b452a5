//! Planar double integrator navigating a course of circular obstacles.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    check_action, clamp_unit, Clock, EnvironmentLayout, Environment, ObservationLayout, StepInfo,
    StepResult, TerminationReason, EPISODE_STEPS,
};
use crate::error::Result;
use crate::rewards::{
    distance_reward, locomotion_reward, total_reward, LocomotionCoefficients, LocomotionState,
    LocomotionWeights, TargetKind,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PointMassConfig {
    /// s
    pub dt: f64,
    /// m/s²
    pub max_accel: f64,
    /// m/s
    pub max_speed: f64,
    /// Standard deviation of the start-position jitter, m. Zero disables it.
    pub jitter: f64,
    /// Speed of the velocity command toward the destination, m/s.
    pub command_speed: f64,
    pub weights: LocomotionWeights,
    pub coeffs: LocomotionCoefficients,
    /// Discount used to value the absorbing goal state.
    pub goal_discount: f64,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            max_accel: 2.0,
            max_speed: 1.5,
            jitter: 0.05,
            command_speed: 1.0,
            weights: LocomotionWeights {
                velocity: 0.15,
                action_rate: 0.05,
                ..LocomotionWeights::zero()
            },
            coeffs: LocomotionCoefficients::default(),
            goal_discount: 0.99,
        }
    }
}

/// Reward paid on the step that reaches the goal: the discounted value of
/// collecting `per_step` on every remaining step of the episode.
pub fn goal_bonus(per_step: f64, discount: f64, steps_taken: usize) -> f64 {
    let remaining = EPISODE_STEPS.saturating_sub(steps_taken);
    if discount >= 1.0 {
        return per_step * remaining as f64;
    }
    per_step * (1.0 - discount.powi(remaining as i32)) / (1.0 - discount)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMassState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub steps: usize,
}

pub const POINTMASS_TERMS: &[&str] = &[
    "velocity",
    "action_rate",
    "dist_destination",
    "dist_obstacles",
    "dist_initial",
    "goal_bonus",
];

pub struct PointMassEnv {
    layout: EnvironmentLayout,
    config: PointMassConfig,
    obs_layout: ObservationLayout,
    state: PointMassState,
    start: [f64; 2],
    previous_action: Vec<f64>,
}

impl PointMassEnv {
    pub fn new(layout: EnvironmentLayout, config: PointMassConfig) -> Result<Self> {
        layout.validate()?;
        let extent = layout.extent();
        let obs_layout = ObservationLayout::new(vec![
            ("position", 2, 1.0 / extent),
            ("velocity", 2, 1.0 / config.max_speed),
            ("obstacles", 2 * layout.obstacles.len(), 1.0 / extent),
            ("destination", 2, 1.0 / extent),
        ]);
        let start = layout.initial;
        Ok(Self {
            state: PointMassState {
                position: start,
                velocity: [0.0; 2],
                steps: 0,
            },
            layout,
            config,
            obs_layout,
            start,
            previous_action: vec![0.0; 2],
        })
    }

    pub fn layout(&self) -> &EnvironmentLayout {
        &self.layout
    }

    pub fn state(&self) -> &PointMassState {
        &self.state
    }

    pub fn set_state(&mut self, state: PointMassState) {
        self.state = state;
    }

    fn observe(&self) -> Vec<f64> {
        let mut raw = Vec::with_capacity(self.obs_layout.dim());
        raw.extend_from_slice(&self.state.position);
        raw.extend_from_slice(&self.state.velocity);
        for o in &self.layout.obstacles {
            raw.extend_from_slice(&o.center);
        }
        raw.extend_from_slice(&self.layout.destination);
        self.obs_layout.scale(&raw)
    }

    fn goal_distance(&self) -> f64 {
        let p = self.state.position;
        let d = self.layout.destination;
        (p[0] - d[0]).hypot(p[1] - d[1])
    }

    fn displacement(&self) -> f64 {
        let p = self.state.position;
        (p[0] - self.start[0]).hypot(p[1] - self.start[1])
    }

    /// Strictly inside some obstacle.
    fn collides(&self, p: [f64; 2]) -> bool {
        self.layout
            .obstacles
            .iter()
            .any(|o| (p[0] - o.center[0]).hypot(p[1] - o.center[1]) < o.radius)
    }
}

impl Environment for PointMassEnv {
    fn name(&self) -> &'static str {
        "pointmass"
    }

    fn observation_layout(&self) -> &ObservationLayout {
        &self.obs_layout
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reward_terms(&self) -> &'static [&'static str] {
        POINTMASS_TERMS
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> StepResult {
        let mut p = self.layout.initial;
        if self.config.jitter > 0.0 {
            let n = Normal::new(0.0, self.config.jitter).expect("positive jitter");
            p[0] += n.sample(rng);
            p[1] += n.sample(rng);
        }
        self.state = PointMassState {
            position: p,
            velocity: [0.0; 2],
            steps: 0,
        };
        self.start = p;
        self.previous_action = vec![0.0; 2];
        StepResult {
            obs: self.observe(),
            reward: 0.0,
            terminated: false,
            truncated: false,
            info: StepInfo {
                distance_to_goal: self.goal_distance(),
                ..StepInfo::default()
            },
        }
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_action(action, 2)?;
        let a = clamp_unit(action);
        let cfg = &self.config;
        let s = &mut self.state;

        let mut v = [
            s.velocity[0] + a[0] * cfg.max_accel * cfg.dt,
            s.velocity[1] + a[1] * cfg.max_accel * cfg.dt,
        ];
        let speed = v[0].hypot(v[1]);
        if speed > cfg.max_speed {
            v[0] *= cfg.max_speed / speed;
            v[1] *= cfg.max_speed / speed;
        }
        let mut p = [s.position[0] + v[0] * cfg.dt, s.position[1] + v[1] * cfg.dt];
        let b = &self.layout.bounds;
        for axis in 0..2 {
            let (lo, hi) = (b[2 * axis], b[2 * axis + 1]);
            if p[axis] < lo || p[axis] > hi {
                p[axis] = p[axis].clamp(lo, hi);
                v[axis] = 0.0;
            }
        }
        s.position = p;
        s.velocity = v;
        s.steps += 1;
        let steps = s.steps;

        let to_goal = [
            self.layout.destination[0] - p[0],
            self.layout.destination[1] - p[1],
        ];
        let goal_dist = to_goal[0].hypot(to_goal[1]);
        let command = if goal_dist > 0.0 {
            [
                to_goal[0] / goal_dist * cfg.command_speed,
                to_goal[1] / goal_dist * cfg.command_speed,
            ]
        } else {
            [0.0; 2]
        };
        let loco = locomotion_reward(
            &LocomotionState {
                orientation_error: 0.0,
                height_error: 0.0,
                base_velocity: v,
                velocity_command: command,
                contact_force: [0.0; 2],
                foot_speed: [0.0; 2],
                torques: Vec::new(),
                previous_action: self.previous_action.clone(),
                action: a.clone(),
            },
            &Clock::default(),
            &cfg.weights,
            &cfg.coeffs,
        );
        let targets = self.layout.targets(self.start);
        let dist = distance_reward(p, &targets);

        let reached = goal_dist <= self.layout.goal_radius;
        let collided = !reached && self.collides(p);
        let bonus = if reached {
            let per_step = cfg.weights.positive_sum() + self.layout.weights.destination;
            goal_bonus(per_step, cfg.goal_discount, steps)
        } else {
            0.0
        };
        let reason = if reached {
            Some(TerminationReason::Goal)
        } else if collided {
            Some(TerminationReason::Collision)
        } else {
            None
        };
        let terminated = reason.is_some();
        let truncated = !terminated && steps >= EPISODE_STEPS;
        self.previous_action = a;

        let terms = vec![
            ("velocity", loco.per_term[4]),
            ("action_rate", loco.per_term[6]),
            ("dist_destination", dist.sum_of(&targets, TargetKind::Destination)),
            ("dist_obstacles", dist.sum_of(&targets, TargetKind::Obstacle)),
            ("dist_initial", dist.sum_of(&targets, TargetKind::InitialPosition)),
            ("goal_bonus", bonus),
        ];
        Ok(StepResult {
            obs: self.observe(),
            reward: total_reward(loco.total, dist.total) + bonus,
            terminated,
            truncated,
            info: StepInfo {
                terms,
                reason,
                collision: collided,
                distance_to_goal: goal_dist,
                displacement: self.displacement(),
                step_length: None,
            },
        })
    }

    fn trace_header(&self) -> &'static [&'static str] {
        &["step", "x", "y", "vx", "vy"]
    }

    fn trace(&self) -> Vec<f64> {
        let s = &self.state;
        vec![s.steps as f64, s.position[0], s.position[1], s.velocity[0], s.velocity[1]]
    }
}
