//! Navigation and gait learning: environments, reward shaping, a small MLP
//! library and a PPO trainer.

pub mod env;
pub mod error;
pub mod harness;
pub mod nnet;
pub mod ppo;
pub mod rewards;
pub mod rng;

pub use error::{Error, Result};
