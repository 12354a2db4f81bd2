use std::path::PathBuf;

use perfpipe_core::error::Category;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] perfpipe_core::Error),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: perfpipe_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Process exit code: 1 usage, 2 schema, 3 semantic, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        let category = match self {
            CliError::Usage(_) => return 1,
            CliError::Format { .. } => return 2,
            CliError::Io { .. } => return 4,
            CliError::Core(e) | CliError::Stage { source: e, .. } => e.category(),
        };
        match category {
            Category::Schema => 2,
            Category::Semantic => 3,
            Category::Runtime => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

/// Attach the pipeline stage that raised an error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for perfpipe_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
