use thiserror::Error;

use crate::estimator::LossParams;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid matching: {0}")]
    Matching(String),

    #[error(
        "loss parameters ({}, {}, {}) do not satisfy the threshold-rule conditions; use the assignment solver",
        .0.fnm, .0.fm1, .0.fm2
    )]
    ConditionsNotMet(LossParams),

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("unknown {kind} `{name}` (registered: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}

pub type Result<T> = std::result::Result<T, LinkError>;
