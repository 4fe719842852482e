use std::path::PathBuf;

/// Errors produced by the simulation and detection stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tap {index} did not converge: doubling the resolution moved it by {delta:e}")]
    Resolution { index: usize, delta: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{what} is too large ({size} > {limit})")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("model does not match detector: {0}")]
    ModelMismatch(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("training diverged at batch {batch}: loss {loss} exceeded 10x the initial loss {initial} for {window} consecutive batches")]
    Divergence {
        batch: usize,
        loss: f64,
        initial: f64,
        window: usize,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
