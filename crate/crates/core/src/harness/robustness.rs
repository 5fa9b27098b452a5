//! Obstacle and destination displacement study.

use std::fmt::Write as _;
use std::path::Path;

use super::checkpoint::Checkpoint;
use super::eval::evaluate_checkpoint;
use crate::env::EnvironmentLayout;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }

    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    Obstacle(usize),
    Destination,
}

/// Grid file: `offsets = ...`, `axes = x,y`, `targets = obstacles,destination`,
/// `episodes = N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub offsets: Vec<f64>,
    pub axes: Vec<Axis>,
    pub obstacles: bool,
    pub destination: bool,
    pub episodes: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            offsets: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            axes: vec![Axis::X, Axis::Y],
            obstacles: true,
            destination: true,
            episodes: 20,
        }
    }
}

impl SweepGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut g = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: idx + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{}'", line)))?;
            let items: Vec<&str> = value.split(',').map(str::trim).collect();
            match key.trim() {
                "offsets" => {
                    g.offsets = items
                        .iter()
                        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
                        .collect::<Option<_>>()
                        .ok_or_else(|| err(format!("bad offsets '{}'", value.trim())))?;
                }
                "axes" => {
                    g.axes = items
                        .iter()
                        .map(|t| match *t {
                            "x" => Ok(Axis::X),
                            "y" => Ok(Axis::Y),
                            _ => Err(err(format!("unknown axis '{}'", t))),
                        })
                        .collect::<Result<_>>()?;
                }
                "targets" => {
                    g.obstacles = false;
                    g.destination = false;
                    for t in items {
                        match t {
                            "obstacles" => g.obstacles = true,
                            "destination" => g.destination = true,
                            _ => return Err(err(format!("unknown target '{}'", t))),
                        }
                    }
                }
                "episodes" => {
                    g.episodes = value
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("bad episode count '{}'", value.trim())))?;
                }
                k => return Err(err(format!("unknown key '{}'", k))),
            }
        }
        if g.episodes == 0 {
            return Err(Error::Config("episodes per cell must be at least 1".into()));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub target: SweepTarget,
    pub axis: Axis,
    pub offset: f64,
    /// `None` when the displaced layout was invalid and the cell was skipped.
    pub report: Option<super::eval::EvalReport>,
}

pub const SWEEP_HEADER: &str =
    "target,index,axis,offset,status,success,collision,fall,timeout,mean_return";

impl SweepCell {
    pub fn to_csv(&self) -> String {
        let (kind, index) = match self.target {
            SweepTarget::Obstacle(i) => ("obstacle", i.to_string()),
            SweepTarget::Destination => ("destination", String::new()),
        };
        let mut s = format!("{},{},{},{}", kind, index, self.axis.name(), self.offset);
        match &self.report {
            Some(r) => write!(
                s,
                ",ok,{},{},{},{},{}",
                r.success_rate, r.collision_rate, r.fall_rate, r.timeout_rate, r.mean_return
            )
            .unwrap(),
            None => s.push_str(",invalid,,,,,"),
        }
        s
    }
}

/// Copy of `base` with one target moved by `offset` along `axis`.
pub fn displaced(base: &EnvironmentLayout, target: SweepTarget, axis: Axis, offset: f64) -> EnvironmentLayout {
    let mut l = base.clone();
    let p = match target {
        SweepTarget::Obstacle(i) => &mut l.obstacles[i].center,
        SweepTarget::Destination => &mut l.destination,
    };
    p[axis.index()] += offset;
    l
}

/// Evaluates the policy with each target displaced along each axis by each
/// offset. Cells whose layout fails validation are reported, not run.
pub fn robustness_sweep(ck: &Checkpoint, base: &EnvironmentLayout, grid: &SweepGrid) -> Result<Vec<SweepCell>> {
    base.validate()?;
    let mut targets = Vec::new();
    if grid.obstacles {
        targets.extend((0..base.obstacles.len()).map(SweepTarget::Obstacle));
    }
    if grid.destination {
        targets.push(SweepTarget::Destination);
    }
    let mut cells = Vec::new();
    for &target in &targets {
        for &axis in &grid.axes {
            for &offset in &grid.offsets {
                let layout = displaced(base, target, axis, offset);
                let report = match layout.validate() {
                    Ok(()) => Some(evaluate_checkpoint(ck, &layout, grid.episodes, true, None)?),
                    Err(_) => None,
                };
                cells.push(SweepCell {
                    target,
                    axis,
                    offset,
                    report,
                });
            }
        }
    }
    Ok(cells)
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = format!("{}\n", SWEEP_HEADER);
    for c in cells {
        s.push_str(&c.to_csv());
        s.push('\n');
    }
    s
}
