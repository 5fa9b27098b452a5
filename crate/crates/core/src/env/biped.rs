//! Planar five-link biped: torso, two thighs, two shanks and point feet.
//!
//! Generalized coordinates are `q = (x, z, pitch, hip_l, knee_l, hip_r,
//! knee_r)` where `(x, z)` is the hip joint and every angle is relative to its
//! parent link. Absolute link angles are measured counter-clockwise from the
//! downward vertical for the legs and from the upward vertical for the torso,
//! so a positive hip angle swings the foot forward (+x) and a bent knee is
//! negative.
//!
//! The equations of motion are assembled from per-body Jacobians:
//! `M(q) = Σ m JᵀJ + I sᵀs` and `M q̈ = τ + Σ J_footᵀ f − Σ m Jᵀ(J̇q̇) + Σ Jᵀ m g`,
//! integrated with semi-implicit Euler.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_action, clamp_unit, Clock, Environment, ObservationLayout, StepInfo, StepResult,
    TerminationReason, EPISODE_STEPS,
};
use crate::error::{Error, Result};
use crate::rewards::{
    distance_reward, locomotion_reward, total_reward, DistanceTarget, LocomotionCoefficients,
    LocomotionState, LocomotionWeights, TargetKind, LOCOMOTION_TERMS,
};

pub const DOF: usize = 7;
pub type Mat7 = SMatrix<f64, DOF, DOF>;
pub type Vec7 = SVector<f64, DOF>;

/// Index of each absolute link angle: torso, left thigh, left shank, right
/// thigh, right shank.
const ANGLE_MASK: [[bool; DOF]; 5] = [
    [false, false, true, false, false, false, false],
    [false, false, true, true, false, false, false],
    [false, false, true, true, true, false, false],
    [false, false, true, false, false, true, false],
    [false, false, true, false, false, true, true],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    /// kg
    pub mass: f64,
    /// m
    pub length: f64,
}

impl Link {
    /// Uniform rod about its centre, kg·m².
    pub fn inertia(&self) -> f64 {
        self.mass * self.length * self.length / 12.0
    }
}

/// A point written as `base + Σ coef · d(α_angle)` with `d(α) = (sin α, −cos α)`.
#[derive(Debug, Clone, Copy)]
struct Chain {
    terms: [(f64, usize); 2],
    len: usize,
}

impl Chain {
    fn one(coef: f64, angle: usize) -> Self {
        Self {
            terms: [(coef, angle), (0.0, 0)],
            len: 1,
        }
    }

    fn two(a: (f64, usize), b: (f64, usize)) -> Self {
        Self {
            terms: [a, b],
            len: 2,
        }
    }

    fn terms(&self) -> &[(f64, usize)] {
        &self.terms[..self.len]
    }
}

#[derive(Debug, Clone, Copy)]
struct Body {
    mass: f64,
    inertia: f64,
    angle: usize,
    com: Chain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipedModel {
    pub torso: Link,
    pub thigh: Link,
    pub shank: Link,
    /// Proportional gains per joint (hip_l, knee_l, hip_r, knee_r), N·m/rad.
    pub kp: [f64; 4],
    /// Derivative gains per joint, N·m·s/rad.
    pub kd: [f64; 4],
    /// N·m
    pub torque_limit: f64,
    /// N/m
    pub ground_stiffness: f64,
    /// N·s/m
    pub ground_damping: f64,
    pub friction: f64,
    /// Stiffness of the tangential stick spring, N/m.
    pub tangential_stiffness: f64,
    /// N·s/m
    pub tangential_damping: f64,
    /// m/s²
    pub gravity: f64,
    /// Hip height of the default crouch, m.
    pub hip_height: f64,
    /// Forward offset of the left foot (and backward of the right) from the
    /// hip in the default crouch, m.
    pub stance_spread: f64,
    /// Largest joint-target offset at full action, rad.
    pub action_range: f64,
    posture: [f64; 4],
}

impl Default for BipedModel {
    fn default() -> Self {
        let mut m = Self {
            torso: Link {
                mass: 30.0,
                length: 0.6,
            },
            thigh: Link {
                mass: 5.0,
                length: 0.4,
            },
            shank: Link {
                mass: 3.0,
                length: 0.4,
            },
            kp: [200.0; 4],
            kd: [5.0; 4],
            torque_limit: 100.0,
            ground_stiffness: 2e4,
            ground_damping: 200.0,
            friction: 0.8,
            tangential_stiffness: 2e4,
            tangential_damping: 200.0,
            gravity: 9.81,
            hip_height: 0.74,
            stance_spread: 0.25,
            action_range: 0.6,
            posture: [0.0; 4],
        };
        m.finalize().expect("default biped model is valid");
        m
    }
}

/// `q_target = posture + action · range` per joint.
pub fn apply_action(model: &BipedModel, action: &[f64]) -> [f64; 4] {
    let mut target = model.posture;
    for (t, a) in target.iter_mut().zip(action) {
        *t += a * model.action_range;
    }
    target
}

/// `τ = kp (q_target − q) − kd q̇`, saturated at the torque limit.
pub fn pd_torque(model: &BipedModel, target: &[f64; 4], q: &[f64], qd: &[f64]) -> [f64; 4] {
    let mut tau = [0.0; 4];
    for j in 0..4 {
        let raw = model.kp[j] * (target[j] - q[j]) - model.kd[j] * qd[j];
        tau[j] = raw.clamp(-model.torque_limit, model.torque_limit);
    }
    tau
}

fn dir(a: f64) -> [f64; 2] {
    [a.sin(), -a.cos()]
}

fn dir_prime(a: f64) -> [f64; 2] {
    [a.cos(), a.sin()]
}

/// Two-link inverse kinematics for a foot at `(dx, -height)` from the hip,
/// knee bent forward. Returns absolute (thigh, shank) angles.
fn leg_ik(l1: f64, l2: f64, dx: f64, height: f64) -> Option<(f64, f64)> {
    let d = dx.hypot(height);
    let cos_knee = (l1 * l1 + l2 * l2 - d * d) / (2.0 * l1 * l2);
    if !(-1.0..1.0).contains(&cos_knee) {
        return None;
    }
    let beta = dx.atan2(height);
    // angle at the hip between the hip-foot line and the thigh
    let cos_hip = (l1 * l1 + d * d - l2 * l2) / (2.0 * l1 * d);
    let hip_off = cos_hip.clamp(-1.0, 1.0).acos();
    let thigh = beta + hip_off;
    let knee_x = l1 * thigh.sin();
    let knee_z = -l1 * thigh.cos();
    let shank = (dx - knee_x).atan2(knee_z + height);
    Some((thigh, shank))
}

impl BipedModel {
    /// Default crouch: (hip_l, knee_l, hip_r, knee_r).
    pub fn posture(&self) -> [f64; 4] {
        self.posture
    }

    /// Validates parameters and solves the crouch posture.
    pub fn finalize(&mut self) -> Result<()> {
        let positive = [
            self.torso.mass,
            self.torso.length,
            self.thigh.mass,
            self.thigh.length,
            self.shank.mass,
            self.shank.length,
            self.torque_limit,
            self.ground_stiffness,
            self.gravity,
            self.hip_height,
            self.action_range,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("biped masses, lengths and stiffness must be positive".into()));
        }
        let nonneg = [
            self.ground_damping,
            self.friction,
            self.tangential_stiffness,
            self.tangential_damping,
        ];
        if nonneg.iter().chain(&self.kp).chain(&self.kd).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("biped gains and damping must be nonnegative".into()));
        }
        let (l1, l2) = (self.thigh.length, self.shank.length);
        let mut posture = [0.0; 4];
        for (leg, dx) in [(0, self.stance_spread), (1, -self.stance_spread)] {
            let (thigh, shank) = leg_ik(l1, l2, dx, self.hip_height).ok_or_else(|| {
                Error::Config("crouch posture out of reach for the leg lengths".into())
            })?;
            posture[2 * leg] = thigh;
            posture[2 * leg + 1] = shank - thigh;
        }
        self.posture = posture;

        let state = self.standing_state();
        for leg in 0..2 {
            let (p, _, _) = self.foot(&state.q, &state.qd, leg);
            if p[1].abs() > 1e-9 {
                return Err(Error::Config(format!("crouch leaves foot {} at z = {}", leg, p[1])));
            }
        }
        Ok(())
    }

    /// Crouch posture at rest with the hip at `(0, hip_height)`.
    pub fn standing_state(&self) -> BipedState {
        let p = self.posture;
        BipedState {
            q: [0.0, self.hip_height, 0.0, p[0], p[1], p[2], p[3]],
            qd: [0.0; DOF],
            normal_force: [0.0; 2],
            tangential_force: [0.0; 2],
            anchors: [None; 2],
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.torso.mass + 2.0 * (self.thigh.mass + self.shank.mass)
    }

    fn bodies(&self) -> [Body; 5] {
        let (t, th, sh) = (self.torso, self.thigh, self.shank);
        let thigh = |angle| Body {
            mass: th.mass,
            inertia: th.inertia(),
            angle,
            com: Chain::one(0.5 * th.length, angle),
        };
        let shank = |thigh_angle, angle| Body {
            mass: sh.mass,
            inertia: sh.inertia(),
            angle,
            com: Chain::two((th.length, thigh_angle), (0.5 * sh.length, angle)),
        };
        [
            Body {
                mass: t.mass,
                inertia: t.inertia(),
                angle: 0,
                // torso points up: -d(α)
                com: Chain::one(-0.5 * t.length, 0),
            },
            thigh(1),
            shank(1, 2),
            thigh(3),
            shank(3, 4),
        ]
    }

    fn foot_chain(&self, leg: usize) -> Chain {
        let (ta, sa) = if leg == 0 { (1, 2) } else { (3, 4) };
        Chain::two((self.thigh.length, ta), (self.shank.length, sa))
    }

    fn angles(q: &[f64; DOF]) -> [f64; 5] {
        let mut a = [0.0; 5];
        for (k, mask) in ANGLE_MASK.iter().enumerate() {
            a[k] = (0..DOF).filter(|&j| mask[j]).map(|j| q[j]).sum();
        }
        a
    }

    fn point(q: &[f64; DOF], angles: &[f64; 5], chain: &Chain) -> [f64; 2] {
        let mut p = [q[0], q[1]];
        for &(c, k) in chain.terms() {
            let d = dir(angles[k]);
            p[0] += c * d[0];
            p[1] += c * d[1];
        }
        p
    }

    fn jacobian(angles: &[f64; 5], chain: &Chain) -> [[f64; DOF]; 2] {
        let mut j = [[0.0; DOF]; 2];
        j[0][0] = 1.0;
        j[1][1] = 1.0;
        for &(c, k) in chain.terms() {
            let dp = dir_prime(angles[k]);
            for col in 2..DOF {
                if ANGLE_MASK[k][col] {
                    j[0][col] += c * dp[0];
                    j[1][col] += c * dp[1];
                }
            }
        }
        j
    }

    /// `J̇ q̇` for a chain point.
    fn velocity_product(angles: &[f64; 5], omegas: &[f64; 5], chain: &Chain) -> [f64; 2] {
        let mut a = [0.0; 2];
        for &(c, k) in chain.terms() {
            let d = dir(angles[k]);
            let w2 = omegas[k] * omegas[k];
            a[0] -= c * d[0] * w2;
            a[1] -= c * d[1] * w2;
        }
        a
    }

    fn omegas(qd: &[f64; DOF]) -> [f64; 5] {
        Self::angles(qd)
    }

    fn apply_jt(jac: &[[f64; DOF]; 2], f: [f64; 2], out: &mut Vec7) {
        for col in 0..DOF {
            out[col] += jac[0][col] * f[0] + jac[1][col] * f[1];
        }
    }

    pub fn mass_matrix(&self, q: &[f64; DOF]) -> Mat7 {
        let angles = Self::angles(q);
        let mut m = Mat7::zeros();
        for body in self.bodies() {
            let j = Self::jacobian(&angles, &body.com);
            for r in 0..DOF {
                for c in 0..DOF {
                    m[(r, c)] += body.mass * (j[0][r] * j[0][c] + j[1][r] * j[1][c]);
                    if ANGLE_MASK[body.angle][r] && ANGLE_MASK[body.angle][c] {
                        m[(r, c)] += body.inertia;
                    }
                }
            }
        }
        m
    }

    /// Gravity minus velocity-product (Coriolis and centripetal) forces.
    pub fn passive_forces(&self, q: &[f64; DOF], qd: &[f64; DOF]) -> Vec7 {
        let angles = Self::angles(q);
        let omegas = Self::omegas(qd);
        let mut h = Vec7::zeros();
        for body in self.bodies() {
            let j = Self::jacobian(&angles, &body.com);
            let a = Self::velocity_product(&angles, &omegas, &body.com);
            let f = [-body.mass * a[0], -body.mass * (a[1] + self.gravity)];
            Self::apply_jt(&j, f, &mut h);
        }
        h
    }

    /// Foot position, velocity and Jacobian for leg 0 (left) or 1 (right).
    pub fn foot(&self, q: &[f64; DOF], qd: &[f64; DOF], leg: usize) -> ([f64; 2], [f64; 2], [[f64; DOF]; 2]) {
        let angles = Self::angles(q);
        let chain = self.foot_chain(leg);
        let p = Self::point(q, &angles, &chain);
        let j = Self::jacobian(&angles, &chain);
        let mut v = [0.0; 2];
        for col in 0..DOF {
            v[0] += j[0][col] * qd[col];
            v[1] += j[1][col] * qd[col];
        }
        (p, v, j)
    }

    pub fn com_position(&self, q: &[f64; DOF]) -> [f64; 2] {
        let angles = Self::angles(q);
        let mut c = [0.0; 2];
        for body in self.bodies() {
            let p = Self::point(q, &angles, &body.com);
            c[0] += body.mass * p[0];
            c[1] += body.mass * p[1];
        }
        let m = self.total_mass();
        [c[0] / m, c[1] / m]
    }

    pub fn com_velocity(&self, q: &[f64; DOF], qd: &[f64; DOF]) -> [f64; 2] {
        let angles = Self::angles(q);
        let mut v = [0.0; 2];
        for body in self.bodies() {
            let j = Self::jacobian(&angles, &body.com);
            for col in 0..DOF {
                v[0] += body.mass * j[0][col] * qd[col];
                v[1] += body.mass * j[1][col] * qd[col];
            }
        }
        let m = self.total_mass();
        [v[0] / m, v[1] / m]
    }

    /// Kinetic plus gravitational energy, summed body by body from link
    /// velocities rather than through the mass matrix.
    pub fn mechanical_energy(&self, state: &BipedState) -> f64 {
        let angles = Self::angles(&state.q);
        let omegas = Self::omegas(&state.qd);
        let mut e = 0.0;
        for body in self.bodies() {
            let p = Self::point(&state.q, &angles, &body.com);
            // finite displacement along q̇ gives the CoM velocity
            let h = 1e-7;
            let mut q2 = state.q;
            for (qi, vi) in q2.iter_mut().zip(&state.qd) {
                *qi += h * vi;
            }
            let p2 = Self::point(&q2, &Self::angles(&q2), &body.com);
            let mut q0 = state.q;
            for (qi, vi) in q0.iter_mut().zip(&state.qd) {
                *qi -= h * vi;
            }
            let p0 = Self::point(&q0, &Self::angles(&q0), &body.com);
            let v = [(p2[0] - p0[0]) / (2.0 * h), (p2[1] - p0[1]) / (2.0 * h)];
            let w = omegas[body.angle];
            e += 0.5 * body.mass * (v[0] * v[0] + v[1] * v[1])
                + 0.5 * body.inertia * w * w
                + body.mass * self.gravity * p[1];
        }
        e
    }

    /// Ground reaction `(tangential, normal)` at one foot. Updates the stick
    /// anchor of that foot.
    fn contact(&self, p: [f64; 2], v: [f64; 2], anchor: &mut Option<f64>) -> [f64; 2] {
        if p[1] >= 0.0 {
            *anchor = None;
            return [0.0, 0.0];
        }
        let normal = (-self.ground_stiffness * p[1] - self.ground_damping * v[1]).max(0.0);
        let a = *anchor.get_or_insert(p[0]);
        let mut tangential =
            -self.tangential_stiffness * (p[0] - a) - self.tangential_damping * v[0];
        let cap = self.friction * normal;
        if tangential.abs() > cap {
            tangential = cap.copysign(tangential);
            // slide the anchor so the spring alone carries the capped force
            if self.tangential_stiffness > 0.0 {
                *anchor = Some(p[0] + (tangential + self.tangential_damping * v[0]) / self.tangential_stiffness);
            }
        }
        [tangential, normal]
    }

    /// Generalized accelerations for the given joint torques. Contact forces
    /// and anchors in `state` are refreshed.
    pub fn accelerations(&self, state: &mut BipedState, torques: &[f64; 4]) -> Option<Vec7> {
        let mut rhs = self.passive_forces(&state.q, &state.qd);
        for (j, t) in torques.iter().enumerate() {
            rhs[3 + j] += t;
        }
        for leg in 0..2 {
            let (p, v, jac) = self.foot(&state.q, &state.qd, leg);
            let f = self.contact(p, v, &mut state.anchors[leg]);
            state.tangential_force[leg] = f[0];
            state.normal_force[leg] = f[1];
            Self::apply_jt(&jac, f, &mut rhs);
        }
        self.mass_matrix(&state.q).cholesky().map(|c| c.solve(&rhs))
    }

    /// One semi-implicit Euler step. Returns false if the state became
    /// non-finite.
    pub fn substep(&self, state: &mut BipedState, torques: &[f64; 4], dt: f64) -> bool {
        let Some(qdd) = self.accelerations(state, torques) else {
            return false;
        };
        for i in 0..DOF {
            state.qd[i] += qdd[i] * dt;
            state.q[i] += state.qd[i] * dt;
        }
        state.q.iter().chain(&state.qd).all(|v| v.is_finite())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// `key = value` model file; keys missing from the file keep their
    /// defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: idx + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{}'", line)))?;
            let key = key.trim();
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| err(format!("'{}' is not a number", value.trim())))?;
            match key {
                "torso_mass" => m.torso.mass = v,
                "torso_length" => m.torso.length = v,
                "thigh_mass" => m.thigh.mass = v,
                "thigh_length" => m.thigh.length = v,
                "shank_mass" => m.shank.mass = v,
                "shank_length" => m.shank.length = v,
                "kp_hip" => (m.kp[0], m.kp[2]) = (v, v),
                "kp_knee" => (m.kp[1], m.kp[3]) = (v, v),
                "kd_hip" => (m.kd[0], m.kd[2]) = (v, v),
                "kd_knee" => (m.kd[1], m.kd[3]) = (v, v),
                "torque_limit" => m.torque_limit = v,
                "ground_stiffness" => m.ground_stiffness = v,
                "ground_damping" => m.ground_damping = v,
                "friction" => m.friction = v,
                "tangential_stiffness" => m.tangential_stiffness = v,
                "tangential_damping" => m.tangential_damping = v,
                "gravity" => m.gravity = v,
                "hip_height" => m.hip_height = v,
                "stance_spread" => m.stance_spread = v,
                "action_range" => m.action_range = v,
                _ => return Err(err(format!("unknown key '{}'", key))),
            }
        }
        m.finalize()?;
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let rows: [(&str, f64); 20] = [
            ("torso_mass", self.torso.mass),
            ("torso_length", self.torso.length),
            ("thigh_mass", self.thigh.mass),
            ("thigh_length", self.thigh.length),
            ("shank_mass", self.shank.mass),
            ("shank_length", self.shank.length),
            ("kp_hip", self.kp[0]),
            ("kp_knee", self.kp[1]),
            ("kd_hip", self.kd[0]),
            ("kd_knee", self.kd[1]),
            ("torque_limit", self.torque_limit),
            ("ground_stiffness", self.ground_stiffness),
            ("ground_damping", self.ground_damping),
            ("friction", self.friction),
            ("tangential_stiffness", self.tangential_stiffness),
            ("tangential_damping", self.tangential_damping),
            ("gravity", self.gravity),
            ("hip_height", self.hip_height),
            ("stance_spread", self.stance_spread),
            ("action_range", self.action_range),
        ];
        for (k, v) in rows {
            writeln!(s, "{} = {}", k, v).unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipedState {
    pub q: [f64; DOF],
    pub qd: [f64; DOF],
    /// Normal ground force per foot from the latest substep, N.
    pub normal_force: [f64; 2],
    pub tangential_force: [f64; 2],
    /// Stick point of each foot while in contact.
    pub anchors: [Option<f64>; 2],
}

impl BipedState {
    pub fn joints(&self) -> [f64; 4] {
        [self.q[3], self.q[4], self.q[5], self.q[6]]
    }

    pub fn joint_rates(&self) -> [f64; 4] {
        [self.qd[3], self.qd[4], self.qd[5], self.qd[6]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipedConfig {
    pub model: BipedModel,
    /// s
    pub physics_dt: f64,
    pub substeps: usize,
    /// Uniform joint-angle noise at reset, rad.
    pub reset_noise: f64,
    /// Forward speed command, m/s.
    pub command_speed: f64,
    /// Destination along +x, m.
    pub destination_x: f64,
    pub destination_k: f64,
    pub destination_weight: f64,
    pub weights: LocomotionWeights,
    pub coeffs: LocomotionCoefficients,
    pub clock: Clock,
    /// Torso pitch beyond which the robot has fallen, rad.
    pub max_pitch: f64,
    /// Fraction of the crouch hip height below which the robot has fallen.
    pub min_height_fraction: f64,
}

impl Default for BipedConfig {
    fn default() -> Self {
        Self {
            model: BipedModel::default(),
            physics_dt: 1e-3,
            substeps: 20,
            reset_noise: 0.02,
            command_speed: 0.3,
            destination_x: 5.0,
            destination_k: 0.3,
            destination_weight: 0.95,
            weights: LocomotionWeights::default(),
            coeffs: LocomotionCoefficients::default(),
            clock: Clock::default(),
            max_pitch: 1.0,
            min_height_fraction: 0.5,
        }
    }
}

impl BipedConfig {
    pub fn control_dt(&self) -> f64 {
        self.physics_dt * self.substeps as f64
    }
}

pub const BIPED_TERMS: &[&str] = &[
    "foot_force",
    "foot_speed",
    "upright",
    "height",
    "velocity",
    "torque",
    "action_rate",
    "dist_destination",
];

pub struct BipedEnv {
    config: BipedConfig,
    obs_layout: ObservationLayout,
    state: BipedState,
    clock: Clock,
    steps: usize,
    previous_action: Vec<f64>,
    start_x: f64,
}

impl BipedEnv {
    pub fn new(config: BipedConfig) -> Result<Self> {
        if !(config.physics_dt > 0.0) || config.substeps == 0 {
            return Err(Error::Config("biped needs a positive physics step".into()));
        }
        let obs_layout = ObservationLayout::new(vec![
            ("joint_angles", 4, 1.0 / std::f64::consts::PI),
            ("joint_rates", 4, 0.1),
            ("pitch", 1, 1.0 / std::f64::consts::PI),
            ("pitch_rate", 1, 0.1),
            ("goal_dx", 1, 0.1),
            ("clock", 2, 1.0),
        ]);
        let state = config.model.standing_state();
        Ok(Self {
            clock: config.clock,
            config,
            obs_layout,
            state,
            steps: 0,
            previous_action: vec![0.0; 4],
            start_x: 0.0,
        })
    }

    pub fn config(&self) -> &BipedConfig {
        &self.config
    }

    pub fn state(&self) -> &BipedState {
        &self.state
    }

    fn observe(&self) -> Vec<f64> {
        let s = &self.state;
        let (sin, cos) = self.clock.features();
        let raw = [
            s.q[3],
            s.q[4],
            s.q[5],
            s.q[6],
            s.qd[3],
            s.qd[4],
            s.qd[5],
            s.qd[6],
            s.q[2],
            s.qd[2],
            self.config.destination_x - s.q[0],
            sin,
            cos,
        ];
        self.obs_layout.scale(&raw)
    }

    fn destination(&self) -> DistanceTarget {
        DistanceTarget {
            position: [self.config.destination_x, 0.0],
            k: self.config.destination_k,
            weight: self.config.destination_weight,
            kind: TargetKind::Destination,
        }
    }
}

impl Environment for BipedEnv {
    fn name(&self) -> &'static str {
        "biped"
    }

    fn observation_layout(&self) -> &ObservationLayout {
        &self.obs_layout
    }

    fn action_dim(&self) -> usize {
        4
    }

    fn reward_terms(&self) -> &'static [&'static str] {
        BIPED_TERMS
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> StepResult {
        let mut state = self.config.model.standing_state();
        if self.config.reset_noise > 0.0 {
            let n = self.config.reset_noise;
            for j in 3..DOF {
                state.q[j] += rng.gen_range(-n..n);
            }
        }
        self.state = state;
        self.clock = Clock {
            phase: 0.0,
            ..self.config.clock
        };
        self.steps = 0;
        self.previous_action = vec![0.0; 4];
        self.start_x = self.state.q[0];
        StepResult {
            obs: self.observe(),
            reward: 0.0,
            terminated: false,
            truncated: false,
            info: StepInfo {
                distance_to_goal: self.config.destination_x - self.start_x,
                ..StepInfo::default()
            },
        }
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_action(action, 4)?;
        let a = clamp_unit(action);
        let model = &self.config.model;
        let target = apply_action(model, &a);

        let before = self.state.clone();
        let mut force_sum = [0.0; 2];
        let mut torques = [0.0; 4];
        let mut finite = true;
        for _ in 0..self.config.substeps {
            torques = pd_torque(model, &target, &self.state.joints(), &self.state.joint_rates());
            if !model.substep(&mut self.state, &torques, self.config.physics_dt) {
                finite = false;
                break;
            }
            force_sum[0] += self.state.normal_force[0];
            force_sum[1] += self.state.normal_force[1];
        }
        self.steps += 1;
        self.clock = self.clock.advance(self.config.control_dt());

        if !finite {
            self.state = before;
            let n = self.reward_terms().len();
            return Ok(StepResult {
                obs: self.observe(),
                reward: 0.0,
                terminated: true,
                truncated: false,
                info: StepInfo {
                    terms: self.reward_terms().iter().map(|&t| (t, 0.0)).take(n).collect(),
                    reason: Some(TerminationReason::Diverged),
                    distance_to_goal: self.config.destination_x - self.state.q[0],
                    displacement: self.state.q[0] - self.start_x,
                    ..StepInfo::default()
                },
            });
        }

        let s = &self.state;
        let k = self.config.substeps as f64;
        let mut foot_speed = [0.0; 2];
        for (leg, speed) in foot_speed.iter_mut().enumerate() {
            let (_, v, _) = model.foot(&s.q, &s.qd, leg);
            *speed = v[0].abs();
        }
        let loco = locomotion_reward(
            &LocomotionState {
                orientation_error: s.q[2],
                height_error: s.q[1] - model.hip_height,
                base_velocity: [s.qd[0], 0.0],
                velocity_command: [self.config.command_speed, 0.0],
                contact_force: [force_sum[0] / k, force_sum[1] / k],
                foot_speed,
                torques: torques.to_vec(),
                previous_action: self.previous_action.clone(),
                action: a.clone(),
            },
            &self.clock,
            &self.config.weights,
            &self.config.coeffs,
        );
        let targets = [self.destination()];
        let dist = distance_reward([s.q[0], 0.0], &targets);
        self.previous_action = a;

        let fell = s.q[2].abs() > self.config.max_pitch
            || s.q[1] < self.config.min_height_fraction * model.hip_height;
        let truncated = !fell && self.steps >= EPISODE_STEPS;

        let mut terms: Vec<(&'static str, f64)> = LOCOMOTION_TERMS
            .iter()
            .zip(loco.per_term)
            .map(|(&n, v)| (n, v))
            .collect();
        terms.push(("dist_destination", dist.total));
        Ok(StepResult {
            obs: self.observe(),
            reward: total_reward(loco.total, dist.total),
            terminated: fell,
            truncated,
            info: StepInfo {
                terms,
                reason: fell.then_some(TerminationReason::Fell),
                collision: false,
                distance_to_goal: self.config.destination_x - s.q[0],
                displacement: s.q[0] - self.start_x,
                step_length: None,
            },
        })
    }

    fn trace_header(&self) -> &'static [&'static str] {
        &[
            "t", "x", "z", "pitch", "hip_l", "knee_l", "hip_r", "knee_r", "vx", "vz", "pitch_rate",
            "hip_l_rate", "knee_l_rate", "hip_r_rate", "knee_r_rate", "force_l", "force_r",
        ]
    }

    fn trace(&self) -> Vec<f64> {
        let mut row = vec![self.steps as f64 * self.config.control_dt()];
        row.extend_from_slice(&self.state.q);
        row.extend_from_slice(&self.state.qd);
        row.extend_from_slice(&self.state.normal_force);
        row
    }
}
