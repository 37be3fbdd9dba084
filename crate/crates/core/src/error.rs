use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SageError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SageError {
    /// Invalid shapes, hyper-parameters, or config documents.
    #[error("configuration error: {0}")]
    Config(String),

    /// A NaN or infinity appeared in a forward pass.
    #[error("non-finite value in forward pass at layer {layer}")]
    Numeric { layer: usize },

    /// An optimizer step produced a non-finite parameter.
    #[error(
        "training diverged at step {step}: non-finite parameter (max-magnitude index {index})"
    )]
    Divergence { step: u64, index: usize },

    #[error("ingestion error in {}{}: {message}", path.display(), line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Ingestion {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SageError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SageError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SageError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that mean training blew up rather than being misconfigured.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            SageError::Numeric { .. } | SageError::Divergence { .. }
        )
    }

    /// Process exit code used by the `sage` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            SageError::Config(_) => 2,
            SageError::Numeric { .. } | SageError::Divergence { .. } => 3,
            SageError::Ingestion { .. } => 4,
            SageError::Io { .. } => 1,
        }
    }
}
