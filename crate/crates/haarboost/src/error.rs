//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A dataset file could not be read or parsed.
    #[error("{path}: {reason}")]
    DatasetFile { path: PathBuf, reason: String },

    /// Training needs at least one example of each class.
    #[error("{class} class has zero examples")]
    EmptyClass { class: &'static str },

    /// Weight normalization lost all mass.
    #[error("weight collapse: weight total is zero or not finite")]
    WeightCollapse,

    /// The selected stump failed the boosting precondition.
    #[error("round {round}: weak learner no better than chance (error {error})")]
    WeakLearner { round: u32, error: f64 },

    /// A partition request that cannot be satisfied.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// Any failure inside the training loop, tagged with the round it
    /// happened in.
    #[error("round {round}: {source}")]
    Round {
        round: u32,
        #[source]
        source: Box<Error>,
    },

    /// Violation of the wire protocol, tagged with the reporting role.
    #[error("{role} {node_id}: {reason}")]
    Protocol {
        role: &'static str,
        node_id: String,
        reason: String,
    },

    /// Model file does not describe a usable classifier.
    #[error("model file: {0}")]
    ModelFormat(String),

    /// Performance-model fitting or reporting failure.
    #[error("{0}")]
    PerfModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand for protocol violations.
    pub fn protocol(role: &'static str, node_id: &str, reason: impl Into<String>) -> Self {
        Error::Protocol {
            role,
            node_id: node_id.to_string(),
            reason: reason.into(),
        }
    }
}
