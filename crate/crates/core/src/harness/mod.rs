//! Experiment plumbing: configuration, training loop, checkpoints, metrics,
//! evaluation and the displacement sweep.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod metrics;
pub mod plot;
pub mod robustness;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::{EnvKind, ExperimentConfig, RewardOverrides};
pub use eval::{evaluate, evaluate_checkpoint, EvalReport};
pub use metrics::MetricsRow;
pub use robustness::{robustness_sweep, sweep_csv, Axis, SweepCell, SweepGrid, SweepTarget};
pub use train::{train, TrainOutcome, Trainer};
