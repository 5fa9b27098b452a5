//! Periodic gait clock.

use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    Left,
    Right,
}

impl Leg {
    pub const BOTH: [Leg; 2] = [Leg::Left, Leg::Right];

    pub fn index(self) -> usize {
        match self {
            Leg::Left => 0,
            Leg::Right => 1,
        }
    }

    pub fn other(self) -> Leg {
        match self {
            Leg::Left => Leg::Right,
            Leg::Right => Leg::Left,
        }
    }
}

/// Phase variable in `[0, 1)` with per-leg stance windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clock {
    pub phase: f64,
    /// Seconds per full gait cycle.
    pub period: f64,
    /// Stance-window start per leg; left 0.0, right 0.5.
    pub offsets: [f64; 2],
    /// Stance fraction of the cycle.
    pub duty: f64,
    /// Width of the linear ramps at stance/swing boundaries, in phase units.
    pub ramp: f64,
}

impl Default for Clock {
    fn default() -> Self {
        Self {
            phase: 0.0,
            period: 0.8,
            offsets: [0.0, 0.5],
            duty: 0.5,
            ramp: 0.02,
        }
    }
}

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl Clock {
    pub fn with_phase(phase: f64) -> Self {
        Self {
            phase: wrap(phase),
            ..Self::default()
        }
    }

    pub fn advance(&self, dt: f64) -> Clock {
        debug_assert!(dt >= 0.0);
        Clock {
            phase: wrap(self.phase + dt / self.period),
            ..*self
        }
    }

    /// Same clock shifted by `delta` cycles.
    pub fn shifted(&self, delta: f64) -> Clock {
        Clock {
            phase: wrap(self.phase + delta),
            ..*self
        }
    }

    /// `(sin 2πφ, cos 2πφ)`.
    pub fn features(&self) -> (f64, f64) {
        let a = TAU * self.phase;
        (a.sin(), a.cos())
    }

    /// Trapezoidal stance weight: 1 inside the stance window, 0 inside swing,
    /// linear ramps of width `ramp` centred on both boundaries.
    pub fn stance(&self, leg: Leg) -> f64 {
        let u = wrap(self.phase - self.offsets[leg.index()]);
        let half_swing = 0.5 * (1.0 - self.duty);
        // v runs from mid-swing before the window to mid-swing after it
        let v = wrap(u + half_swing) - half_swing;
        let inside = v.min(self.duty - v);
        (0.5 + inside / self.ramp).clamp(0.0, 1.0)
    }
}
