use thiserror::Error;

/// Errors surfaced to the command line, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values or user-supplied identifiers (exit 2).
    #[error("{0}")]
    Config(String),
    /// Missing, unreadable or unwritable files (exit 3).
    #[error("{0}")]
    Io(String),
    /// Anything else (exit 1).
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Other(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<relstab_core::Error> for CliError {
    fn from(e: relstab_core::Error) -> Self {
        use relstab_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) | E::Layer { .. } | E::Input(_) => CliError::Config(msg),
            E::Io { .. } | E::Checkpoint(_) | E::Pgm(_) => CliError::Io(msg),
            E::Internal(_) => CliError::Other(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
