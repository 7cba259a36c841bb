//! Tabular Q-learning with a scaled distance penalty (Q-SD) for a robot arm
//! cleaning a table split into a square grid of cells, plus the harness
//! that sweeps the penalty scale and picks the best one.
//!
//! The engine is generic over the float type; the aliases below fix it to
//! `f64`, which the command-line tool uses throughout.

pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod oracle;
pub mod output;
pub mod report;
pub mod scalar;
pub mod sweep;

pub use env::{CleanState, GridSpec, GridWorld, StepKind};
pub use error::{QsdError, Result};
pub use scalar::Scalar;

pub type QTable64 = learner::QTable<f64>;
pub type LearnerConfig64 = learner::LearnerConfig<f64>;
pub type EpisodeStats64 = learner::EpisodeStats<f64>;
pub type Batch64 = learner::Batch<f64>;
pub type SweepReport64 = sweep::SweepReport<f64>;
pub type ScaleStats64 = metrics::ScaleStats<f64>;

pub type QTable32 = learner::QTable<f32>;
pub type LearnerConfig32 = learner::LearnerConfig<f32>;
pub type EpisodeStats32 = learner::EpisodeStats<f32>;
