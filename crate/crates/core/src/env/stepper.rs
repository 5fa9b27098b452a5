//! Top-down clocked biped stepper.
//!
//! Each control step covers half a gait cycle. The clock picks the swing
//! foot, the policy places it relative to the current heading, and the base
//! snaps to the midpoint of the two feet. Falling and balance are absent; what
//! remains is footstep placement under the same clock, observation and reward
//! structure as the full biped, on the same courses as the point mass.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::pointmass::goal_bonus;
use super::{
    check_action, clamp_unit, Clock, EnvironmentLayout, Environment, Leg, ObservationLayout,
    StepInfo, StepResult, TerminationReason, EPISODE_STEPS,
};
use crate::error::Result;
use crate::rewards::{
    distance_reward, locomotion_reward, total_reward, LocomotionCoefficients, LocomotionState,
    LocomotionWeights, TargetKind,
};

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    /// Swing displacement at full action, m.
    pub max_step: f64,
    /// Largest allowed distance between the feet, m.
    pub max_stride: f64,
    /// Heading change at full action, rad.
    pub max_turn: f64,
    /// Lateral offset of each foot from the base at reset, m.
    pub half_width: f64,
    /// Speed of the velocity command along the current heading, m/s.
    pub command_speed: f64,
    /// Standard deviation of the start-position jitter, m.
    pub jitter: f64,
    pub weights: LocomotionWeights,
    pub coeffs: LocomotionCoefficients,
    pub goal_discount: f64,
    pub clock: Clock,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            max_step: 0.25,
            max_stride: 0.5,
            max_turn: 0.3,
            half_width: 0.1,
            command_speed: 0.25,
            jitter: 0.05,
            weights: LocomotionWeights {
                foot_force: 0.15,
                foot_speed: 0.15,
                velocity: 0.15,
                action_rate: 0.05,
                ..LocomotionWeights::zero()
            },
            coeffs: LocomotionCoefficients {
                speed_ref: 0.5,
                ..LocomotionCoefficients::default()
            },
            goal_discount: 0.99,
            clock: Clock::default(),
        }
    }
}

impl StepperConfig {
    /// Seconds per control step: half a gait cycle.
    pub fn dt(&self) -> f64 {
        0.5 * self.clock.period
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperState {
    pub base: [f64; 2],
    pub heading: f64,
    /// Left, right.
    pub feet: [[f64; 2]; 2],
    pub clock: Clock,
    pub steps: usize,
    pub previous_action: Vec<f64>,
}

impl StepperState {
    /// Foot that moves during the half cycle starting at the current phase.
    pub fn swing_leg(&self) -> Leg {
        let mid = self.clock.shifted(0.25);
        if mid.stance(Leg::Left) >= 0.5 {
            Leg::Right
        } else {
            Leg::Left
        }
    }
}

pub const STEPPER_TERMS: &[&str] = &[
    "foot_force",
    "foot_speed",
    "velocity",
    "action_rate",
    "dist_destination",
    "dist_obstacles",
    "dist_initial",
    "goal_bonus",
];

pub struct StepperEnv {
    layout: EnvironmentLayout,
    config: StepperConfig,
    obs_layout: ObservationLayout,
    state: StepperState,
    start: [f64; 2],
    last_swing: Option<Leg>,
    last_step_length: f64,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

impl StepperEnv {
    pub fn new(layout: EnvironmentLayout, config: StepperConfig) -> Result<Self> {
        layout.validate()?;
        let extent = layout.extent();
        let obs_layout = ObservationLayout::new(vec![
            ("base", 2, 1.0 / extent),
            ("heading", 2, 1.0),
            ("feet", 4, 1.0 / config.max_stride),
            ("obstacles", 2 * layout.obstacles.len(), 1.0 / extent),
            ("destination", 2, 1.0 / extent),
            ("clock", 2, 1.0),
        ]);
        let start = layout.initial;
        let state = Self::standing_at(start, 0.0, &config);
        Ok(Self {
            layout,
            config,
            obs_layout,
            state,
            start,
            last_swing: None,
            last_step_length: 0.0,
        })
    }

    fn standing_at(base: [f64; 2], heading: f64, config: &StepperConfig) -> StepperState {
        // left foot on the left of the heading direction
        let lateral = [-heading.sin(), heading.cos()];
        let w = config.half_width;
        StepperState {
            base,
            heading,
            feet: [
                [base[0] + w * lateral[0], base[1] + w * lateral[1]],
                [base[0] - w * lateral[0], base[1] - w * lateral[1]],
            ],
            clock: Clock {
                phase: 0.0,
                ..config.clock
            },
            steps: 0,
            previous_action: vec![0.0; 3],
        }
    }

    pub fn layout(&self) -> &EnvironmentLayout {
        &self.layout
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    pub fn state(&self) -> &StepperState {
        &self.state
    }

    fn observe(&self) -> Vec<f64> {
        let s = &self.state;
        let mut raw = Vec::with_capacity(self.obs_layout.dim());
        raw.extend_from_slice(&s.base);
        raw.push(s.heading.sin());
        raw.push(s.heading.cos());
        for foot in &s.feet {
            raw.extend_from_slice(&sub(*foot, s.base));
        }
        for o in &self.layout.obstacles {
            raw.extend_from_slice(&o.center);
        }
        raw.extend_from_slice(&self.layout.destination);
        let (sin, cos) = s.clock.features();
        raw.push(sin);
        raw.push(cos);
        self.obs_layout.scale(&raw)
    }

    fn inside_obstacle(&self, p: [f64; 2]) -> bool {
        self.layout
            .obstacles
            .iter()
            .any(|o| norm(sub(p, o.center)) < o.radius)
    }
}

impl Environment for StepperEnv {
    fn name(&self) -> &'static str {
        "stepper"
    }

    fn observation_layout(&self) -> &ObservationLayout {
        &self.obs_layout
    }

    fn action_dim(&self) -> usize {
        3
    }

    fn reward_terms(&self) -> &'static [&'static str] {
        STEPPER_TERMS
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> StepResult {
        let mut base = self.layout.initial;
        if self.config.jitter > 0.0 {
            let n = Normal::new(0.0, self.config.jitter).expect("positive jitter");
            base[0] += n.sample(rng);
            base[1] += n.sample(rng);
        }
        let to_goal = sub(self.layout.destination, base);
        let heading = to_goal[1].atan2(to_goal[0]);
        self.state = Self::standing_at(base, heading, &self.config);
        self.start = base;
        self.last_swing = None;
        self.last_step_length = 0.0;
        StepResult {
            obs: self.observe(),
            reward: 0.0,
            terminated: false,
            truncated: false,
            info: StepInfo {
                distance_to_goal: norm(to_goal),
                ..StepInfo::default()
            },
        }
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_action(action, 3)?;
        let a = clamp_unit(action);
        let cfg = &self.config;
        let dt = cfg.dt();

        let swing = self.state.swing_leg();
        let stance = swing.other();
        // gating is read at the middle of the half cycle being executed
        let gate = self.state.clock.shifted(0.25);

        let s = &mut self.state;
        let (sin, cos) = s.heading.sin_cos();
        let local = [a[0] * cfg.max_step, a[1] * cfg.max_step];
        let world = [cos * local[0] - sin * local[1], sin * local[0] + cos * local[1]];
        let old_swing = s.feet[swing.index()];
        let stance_pos = s.feet[stance.index()];
        let mut target = [old_swing[0] + world[0], old_swing[1] + world[1]];
        let reach = sub(target, stance_pos);
        let reach_len = norm(reach);
        if reach_len > cfg.max_stride {
            let f = cfg.max_stride / reach_len;
            target = [stance_pos[0] + reach[0] * f, stance_pos[1] + reach[1] * f];
        }
        // the stance foot is inside the box, so projecting onto it never
        // lengthens the stride
        let b = self.layout.bounds;
        target = [target[0].clamp(b[0], b[1]), target[1].clamp(b[2], b[3])];
        s.feet[swing.index()] = target;
        let step_length = norm(sub(target, old_swing));

        let old_base = s.base;
        s.base = [
            0.5 * (s.feet[0][0] + s.feet[1][0]),
            0.5 * (s.feet[0][1] + s.feet[1][1]),
        ];
        s.heading += a[2] * cfg.max_turn;
        s.clock = s.clock.advance(dt);
        s.steps += 1;

        let base = s.base;
        let to_goal = sub(self.layout.destination, base);
        let goal_dist = norm(to_goal);
        // the gait terms reward walking where the feet point; navigation is
        // left to the distance terms
        let command = [cos * cfg.command_speed, sin * cfg.command_speed];
        let mut contact_force = [0.0; 2];
        contact_force[stance.index()] = cfg.coeffs.force_ref;
        let mut foot_speed = [0.0; 2];
        foot_speed[swing.index()] = step_length / dt;
        let loco = locomotion_reward(
            &LocomotionState {
                orientation_error: 0.0,
                height_error: 0.0,
                base_velocity: [(base[0] - old_base[0]) / dt, (base[1] - old_base[1]) / dt],
                velocity_command: command,
                contact_force,
                foot_speed,
                torques: Vec::new(),
                previous_action: s.previous_action.clone(),
                action: a.clone(),
            },
            &gate,
            &cfg.weights,
            &cfg.coeffs,
        );
        s.previous_action = a;

        let targets = self.layout.targets(self.start);
        let dist = distance_reward(base, &targets);

        let reached = goal_dist <= self.layout.goal_radius;
        let collided = !reached
            && (self.inside_obstacle(base)
                || self.inside_obstacle(self.state.feet[0])
                || self.inside_obstacle(self.state.feet[1]));
        let bonus = if reached {
            let per_step = cfg.weights.positive_sum() + self.layout.weights.destination;
            goal_bonus(per_step, cfg.goal_discount, self.state.steps)
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
        let truncated = !terminated && self.state.steps >= EPISODE_STEPS;
        self.last_swing = Some(swing);
        self.last_step_length = step_length;

        let terms = vec![
            ("foot_force", loco.per_term[0]),
            ("foot_speed", loco.per_term[1]),
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
                displacement: norm(sub(base, self.start)),
                step_length: Some(step_length),
            },
        })
    }

    fn trace_header(&self) -> &'static [&'static str] {
        &["step", "base_x", "base_y", "swing_foot", "step_length"]
    }

    fn trace(&self) -> Vec<f64> {
        let swing = match self.last_swing {
            Some(Leg::Left) => 0.0,
            Some(Leg::Right) => 1.0,
            None => -1.0,
        };
        vec![
            self.state.steps as f64,
            self.state.base[0],
            self.state.base[1],
            swing,
            self.last_step_length,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn env() -> StepperEnv {
        StepperEnv::new(
            EnvironmentLayout::default(),
            StepperConfig {
                jitter: 0.0,
                ..StepperConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn reset_places_base_between_feet_facing_goal() {
        let mut e = env();
        let r = e.reset(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(e.state().base, e.layout().initial);
        let n = r.obs.len();
        assert_eq!(n, e.observation_layout().dim());
        assert_eq!((r.obs[n - 2], r.obs[n - 1]), (0.0, 1.0));
        assert_eq!(e.state().heading, 0.0);
    }

    #[test]
    fn reset_is_seeded() {
        let mut a = StepperEnv::new(EnvironmentLayout::default(), StepperConfig::default()).unwrap();
        let mut b = StepperEnv::new(EnvironmentLayout::default(), StepperConfig::default()).unwrap();
        assert_eq!(
            a.reset(&mut ChaCha8Rng::seed_from_u64(3)),
            b.reset(&mut ChaCha8Rng::seed_from_u64(3))
        );
    }

    #[test]
    fn zero_action_steps_in_place() {
        let mut e = env();
        e.reset(&mut ChaCha8Rng::seed_from_u64(0));
        let base0 = e.state().base;
        for _ in 0..2 {
            let r = e.step(&[0.0, 0.0, 0.0]).unwrap();
            assert_eq!(r.info.step_length, Some(0.0));
        }
        assert_eq!(e.state().base, base0);
    }

    #[test]
    fn single_swing_moves_base_half_as_far() {
        let mut e = env();
        e.reset(&mut ChaCha8Rng::seed_from_u64(0));
        let base0 = e.state().base;
        let swing = e.state().swing_leg();
        let stance_before = e.state().feet[swing.other().index()];
        e.step(&[0.8, 0.0, 0.0]).unwrap();
        let d = 0.8 * 0.25;
        assert_eq!(e.state().feet[swing.other().index()], stance_before);
        assert!((e.state().base[0] - (base0[0] + d / 2.0)).abs() < 1e-12);
        assert!((e.state().base[1] - base0[1]).abs() < 1e-12);
    }

    #[test]
    fn swing_leg_alternates_and_stance_foot_stays() {
        let mut e = env();
        e.reset(&mut ChaCha8Rng::seed_from_u64(0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut prev = None;
        for _ in 0..40 {
            let swing = e.state().swing_leg();
            if let Some(p) = prev {
                assert_ne!(p, swing);
            }
            prev = Some(swing);
            let stance_pos = e.state().feet[swing.other().index()];
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = e.step(&a).unwrap();
            let s = e.state();
            assert_eq!(s.feet[swing.other().index()], stance_pos);
            let mid = [0.5 * (s.feet[0][0] + s.feet[1][0]), 0.5 * (s.feet[0][1] + s.feet[1][1])];
            assert!(norm(sub(s.base, mid)) < 1e-12);
            assert!(norm(sub(s.feet[0], s.feet[1])) <= 0.5 + 1e-12);
            let sum: f64 = r.info.terms.iter().map(|t| t.1).sum();
            assert!((sum - r.reward).abs() < 1e-12);
            if r.done() {
                break;
            }
        }
    }

    #[test]
    fn stride_is_clamped() {
        let mut e = env();
        e.reset(&mut ChaCha8Rng::seed_from_u64(0));
        e.step(&[1.0, 0.0, 0.0]).unwrap();
        e.step(&[1.0, 0.0, 0.0]).unwrap();
        let s = e.state();
        assert!(norm(sub(s.feet[0], s.feet[1])) <= 0.5 + 1e-12);
    }
}
