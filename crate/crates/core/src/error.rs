use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value on gradient tape at node {node}")]
    NonFinite { node: usize },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
