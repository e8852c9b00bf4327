use std::fmt;
use std::path::Path;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// The run finished but some validation did not pass.
    ValidationFailures = 1,
    /// Bad or missing input.
    Input = 2,
    Internal = 3,
}

/// A fatal error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
    pub exit: Exit,
}

impl StageError {
    pub fn input(stage: &'static str, message: impl fmt::Display) -> Self {
        Self {
            stage,
            message: message.to_string(),
            exit: Exit::Input,
        }
    }

    pub fn internal(stage: &'static str, message: impl fmt::Display) -> Self {
        Self {
            stage,
            message: message.to_string(),
            exit: Exit::Internal,
        }
    }

    pub fn not_found(stage: &'static str, path: &Path) -> Self {
        Self::input(stage, format!("file not found: {}", path.display()))
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

pub type StageResult<T> = Result<T, StageError>;
