//! Course description shared by the navigation environments, and its
//! line-based `key = value` file format.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rewards::{DistanceGains, DistanceTarget, DistanceWeights, TargetKind};

/// The shipped four-obstacle course.
pub const COURSE4: &str = include_str!("../../layouts/course4.layout");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentLayout {
    pub obstacles: Vec<Obstacle>,
    pub destination: [f64; 2],
    pub goal_radius: f64,
    pub initial: [f64; 2],
    /// `[x_min, x_max, y_min, y_max]`, m.
    pub bounds: [f64; 4],
    pub gains: DistanceGains,
    pub weights: DistanceWeights,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn inside(bounds: &[f64; 4], p: [f64; 2]) -> bool {
    p[0] >= bounds[0] && p[0] <= bounds[1] && p[1] >= bounds[2] && p[1] <= bounds[3]
}

impl Default for EnvironmentLayout {
    fn default() -> Self {
        Self::parse(COURSE4).expect("shipped course parses")
    }
}

impl EnvironmentLayout {
    pub fn validate(&self) -> Result<()> {
        let all_finite = self
            .obstacles
            .iter()
            .flat_map(|o| [o.center[0], o.center[1], o.radius])
            .chain(self.destination)
            .chain(self.initial)
            .chain(self.bounds)
            .chain([self.goal_radius])
            .all(f64::is_finite);
        if !all_finite {
            return Err(Error::Layout("non-finite value".into()));
        }
        if self.goal_radius <= 0.0 {
            return Err(Error::Layout("goal radius must be positive".into()));
        }
        if self.bounds[0] >= self.bounds[1] || self.bounds[2] >= self.bounds[3] {
            return Err(Error::Layout(format!("empty workspace bounds {:?}", self.bounds)));
        }
        if !inside(&self.bounds, self.initial) || !inside(&self.bounds, self.destination) {
            return Err(Error::Layout("start and destination must lie inside the bounds".into()));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if o.radius <= 0.0 {
                return Err(Error::Layout(format!("obstacle {} has radius {}", i, o.radius)));
            }
            if !inside(&self.bounds, o.center) {
                return Err(Error::Layout(format!("obstacle {} lies outside the bounds", i)));
            }
            if dist(o.center, self.initial) <= o.radius {
                return Err(Error::Layout(format!("obstacle {} covers the start", i)));
            }
            if dist(o.center, self.destination) <= o.radius + self.goal_radius {
                return Err(Error::Layout(format!("obstacle {} overlaps the goal disk", i)));
            }
        }
        let targets = self.targets(self.initial);
        targets.iter().try_for_each(DistanceTarget::validate)
    }

    /// Distance targets: destination, every obstacle, then the start position.
    pub fn targets(&self, start: [f64; 2]) -> Vec<DistanceTarget> {
        let mut targets = Vec::with_capacity(self.obstacles.len() + 2);
        targets.push(DistanceTarget {
            position: self.destination,
            k: self.gains.destination,
            weight: self.weights.destination,
            kind: TargetKind::Destination,
        });
        for o in &self.obstacles {
            targets.push(DistanceTarget {
                position: o.center,
                k: self.gains.obstacle,
                weight: self.weights.obstacle,
                kind: TargetKind::Obstacle,
            });
        }
        targets.push(DistanceTarget {
            position: start,
            k: self.gains.initial,
            weight: self.weights.initial,
            kind: TargetKind::InitialPosition,
        });
        targets
    }

    /// Largest absolute coordinate of the workspace, used to scale positions.
    pub fn extent(&self) -> f64 {
        self.bounds.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut obstacles = Vec::new();
        let mut destination = None;
        let mut initial = None;
        let mut bounds = None;
        let mut gains = DistanceGains::default();
        let mut weights = DistanceWeights::default();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected key = value, got '{}'", line),
            })?;
            let key = key.trim();
            let nums = parse_numbers(value, line_no)?;
            let want = |n: usize| -> Result<()> {
                if nums.len() == n {
                    Ok(())
                } else {
                    Err(Error::Parse {
                        line: line_no,
                        msg: format!("'{}' takes {} numbers, got {}", key, n, nums.len()),
                    })
                }
            };
            match key {
                "obstacle" => {
                    want(3)?;
                    obstacles.push(Obstacle {
                        center: [nums[0], nums[1]],
                        radius: nums[2],
                    });
                }
                "destination" => {
                    want(3)?;
                    destination = Some(([nums[0], nums[1]], nums[2]));
                }
                "initial" => {
                    want(2)?;
                    initial = Some([nums[0], nums[1]]);
                }
                "bounds" => {
                    want(4)?;
                    bounds = Some([nums[0], nums[1], nums[2], nums[3]]);
                }
                "k_destination" | "k_obstacle" | "k_initial" | "w_destination" | "w_obstacle"
                | "w_initial" => {
                    want(1)?;
                    let v = nums[0];
                    match key {
                        "k_destination" => gains.destination = v,
                        "k_obstacle" => gains.obstacle = v,
                        "k_initial" => gains.initial = v,
                        "w_destination" => weights.destination = v,
                        "w_obstacle" => weights.obstacle = v,
                        _ => weights.initial = v,
                    }
                }
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown key '{}'", key),
                    })
                }
            }
        }

        let missing = |what: &str| Error::Layout(format!("missing '{}' line", what));
        let (destination, goal_radius) = destination.ok_or_else(|| missing("destination"))?;
        let layout = Self {
            obstacles,
            destination,
            goal_radius,
            initial: initial.ok_or_else(|| missing("initial"))?,
            bounds: bounds.ok_or_else(|| missing("bounds"))?,
            gains,
            weights,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Canonical text form. `parse(to_text(l)) == l` holds bit for bit since
    /// floats are written in shortest round-trip notation.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let b = &self.bounds;
        writeln!(s, "initial = {},{}", self.initial[0], self.initial[1]).unwrap();
        writeln!(
            s,
            "destination = {},{},{}",
            self.destination[0], self.destination[1], self.goal_radius
        )
        .unwrap();
        for o in &self.obstacles {
            writeln!(s, "obstacle = {},{},{}", o.center[0], o.center[1], o.radius).unwrap();
        }
        writeln!(s, "bounds = {},{},{},{}", b[0], b[1], b[2], b[3]).unwrap();
        writeln!(s, "k_destination = {}", self.gains.destination).unwrap();
        writeln!(s, "k_obstacle = {}", self.gains.obstacle).unwrap();
        writeln!(s, "k_initial = {}", self.gains.initial).unwrap();
        writeln!(s, "w_destination = {}", self.weights.destination).unwrap();
        writeln!(s, "w_obstacle = {}", self.weights.obstacle).unwrap();
        writeln!(s, "w_initial = {}", self.weights.initial).unwrap();
        s
    }
}

fn parse_numbers(value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("'{}' is not a number", t),
            })
        })
        .collect()
}
