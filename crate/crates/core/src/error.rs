use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bin factor mismatch: size {size} is not divisible by {factor}")]
    BinFactorMismatch { size: usize, factor: usize },

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid phantom id {0} (expected 1..=6)")]
    InvalidPhantom(u8),

    #[error("operation requires a non-empty polygon")]
    EmptyPolygon,

    #[error("insufficient shadows: {usable} usable angles, need at least 2")]
    InsufficientShadows { usable: usize },

    #[error("rank-deficient least-squares system")]
    RankDeficient,

    #[error("need more than {degree} samples for a degree-{degree} fit, got {samples}")]
    InsufficientSamples { samples: usize, degree: usize },

    #[error("constrained least squares failed: {0}")]
    Solver(String),

    #[error("invalid tilt schedule: {0}")]
    Schedule(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
