//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {context}: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    Shape {
        context: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("data format error in {path}: {reason}")]
    DataFormat { path: String, reason: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("label {label} out of range [0, {max}]")]
    LabelOutOfRange { label: usize, max: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
