//! Shared error type for the toolkit.

use thiserror::Error;

/// Unified error for planning, parsing, curation, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its valid range or inconsistent.
    #[error("config: {0}")]
    Config(String),

    /// An input value (image size, record field, CLI argument) is invalid.
    #[error("input: {0}")]
    Input(String),

    /// A reference points at something that does not exist (image index,
    /// crop index, category name).
    #[error("reference: {0}")]
    Reference(String),

    /// A coordinate falls outside the crop it was mapped into.
    #[error("point ({x}, {y}) falls outside crop {crop}")]
    OutOfCrop { x: f64, y: f64, crop: usize },

    /// A malformed record in a JSONL stream, with its location.
    #[error("record at line {line} (byte {offset}): {message}")]
    Record {
        line: usize,
        offset: u64,
        message: String,
    },

    /// An HTTP transport failure talking to a model or judge endpoint.
    #[error("transport: {0}")]
    Transport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad data rather than bad usage; the CLI maps
    /// these to exit code 1 and everything config-shaped to exit code 2.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
