use std::path::PathBuf;

use poifair_core::error::{Error as CoreError, ErrorKind};
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Every problem found in the configuration, one message each.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("output directory {path} is not writable: {source}")]
    OutputDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: CoreError,
    },

    #[error("stage {stage} failed: cannot write {path}: {source}")]
    Write {
        stage: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn stage(stage: impl Into<String>, source: CoreError) -> Self {
        HarnessError::Stage {
            stage: stage.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::OutputDir { .. } => EXIT_CONFIG,
            HarnessError::Stage { source, .. } => match source.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numeric => EXIT_NUMERIC,
            },
            HarnessError::Write { .. } => EXIT_DATA,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
