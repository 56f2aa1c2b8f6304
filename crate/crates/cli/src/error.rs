use nocs_core::NocsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Missing, unreadable or unwritable files.
    #[error("input error: {0}")]
    Input(String),
    #[error("validation error: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl From<NocsError> for CliError {
    fn from(e: NocsError) -> Self {
        CliError::Validation(e.to_string())
    }
}
