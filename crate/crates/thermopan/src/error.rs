//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),

    #[error("{path}: thermal input must be single-channel")]
    NotSingleChannel { path: PathBuf },

    #[error("{path}: unsupported format: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("pixel values out of range: {0}")]
    OutOfRange(String),

    #[error("non-finite pixel values: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("frame is not normalized; run instance normalization first")]
    NotNormalized,

    #[error("empty input set: {0}")]
    EmptyInput(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("bad config: {0}")]
    Config(String),

    #[error("bad parameter file: {0}")]
    ParamsFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
