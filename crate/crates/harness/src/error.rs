use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// A config problem pinned to a source location.
    #[error("{}:{line}:{col}: {message}", path.display())]
    Config {
        path: PathBuf,
        line: usize,
        col: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("{method}: {source}")]
    Divergence {
        method: String,
        source: saddle_core::Error,
    },

    #[error("invariant check failed: {}", .0.join(", "))]
    Invariant(Vec<String>),

    #[error(transparent)]
    Core(#[from] saddle_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialize(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Divergence { .. } | HarnessError::Core(saddle_core::Error::Diverged { .. }) => EXIT_DIVERGENCE,
            HarnessError::Invariant(_) => EXIT_INVARIANT,
            _ => EXIT_VALIDATION,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
