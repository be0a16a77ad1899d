//! Error taxonomy shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (bad dimensions, out-of-range knobs).
    #[error("configuration error: {0}")]
    Config(String),
    /// A caller broke an operation's contract (dimension mismatch, empty input, bad index).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Training produced a non-finite loss or parameter.
    #[error("training diverged: {0}")]
    Diverged(String),
    /// A wire frame could not be decoded.
    #[error("malformed message: {0}")]
    Malformed(String),
    /// The protocol reached an invalid state (e.g. nothing to synthesize from).
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
