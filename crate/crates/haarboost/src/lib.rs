//! AdaBoost training of Haar-feature window classifiers with three
//! interchangeable execution strategies: a sequential scan, a multi-core
//! parallel scan, and a hierarchical master/sub-master/worker cluster.
//!
//! All three strategies produce bit-identical models for the same inputs;
//! the tie-break key `(weighted error, global feature index)` is total, so
//! the winning stump per round does not depend on scheduling, worker count,
//! or topology. The crate also ships the predictive round-time model used
//! to pick a cluster fan-out, and a small benchmark harness around it.

pub mod boosting;
pub mod cli;
pub mod cluster;
pub mod dataset;
pub mod engine;
mod error;
pub mod features;
pub mod imaging;
pub mod jsonio;
pub mod model;
pub mod perfmodel;

pub use error::Error;

/// Side length of the training window; every training image is this square.
pub const WINDOW: u32 = 24;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
