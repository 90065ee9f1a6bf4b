use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A layer chain or other configuration does not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// A shape or layout mismatch at a specific layer of a chain.
    #[error("configuration error at layer {layer}: {message}")]
    Layer { layer: usize, message: String },

    /// Caller supplied data that violates an operation's precondition.
    #[error("input error: {0}")]
    Input(String),

    /// An invariant the library itself maintains was broken.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error(transparent)]
    Pgm(#[from] PgmError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn layer(layer: usize, message: impl Into<String>) -> Self {
        Error::Layer { layer, message: message.into() }
    }

    /// True for errors caused by the file system rather than bad inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("truncated file")]
    Truncated,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("not a binary PGM (wrong magic)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported depth: maxval {0} (only 65535 is supported)")]
    UnsupportedDepth(u32),
    #[error("truncated PGM payload")]
    Truncated,
}
