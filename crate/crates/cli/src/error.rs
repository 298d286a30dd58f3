use std::fmt;
use std::io;
use std::process::ExitCode;

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad or missing arguments (exit 2).
    Usage(String),
    /// Reading or writing a file failed (exit 3).
    Io(String),
    /// Inputs were readable but invalid (exit 4).
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 2,
            Self::Io(_) => 3,
            Self::Validation(_) => 4,
        })
    }

    pub fn io(context: impl fmt::Display, err: io::Error) -> Self {
        Self::Io(format!("{context}: {err}"))
    }

    /// Wraps a library error, keeping IO failures distinct from bad inputs.
    pub fn core(context: impl fmt::Display, err: supwatt_core::Error) -> Self {
        match err {
            supwatt_core::Error::Io(e) => Self::io(context, e),
            other => Self::Validation(format!("{context}: {other}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Io(m) => write!(f, "io error: {m}"),
            Self::Validation(m) => write!(f, "invalid input: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a context string to library results.
pub trait Context<T> {
    fn context(self, what: impl fmt::Display) -> CliResult<T>;
}

impl<T> Context<T> for supwatt_core::Result<T> {
    fn context(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::core(what, e))
    }
}
