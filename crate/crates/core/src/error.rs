use thiserror::Error;

/// Errors produced by geometry, design and pipeline code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("angle {0} rad is outside the open interval (-pi/2, pi/2)")]
    AngleOutOfRange(f64),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid design: {0}")]
    Design(String),

    #[error("{path}:{line}: {message}")]
    ConfigParse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    ConfigValue(String),

    #[error("image grids do not match: {0}")]
    GridMismatch(String),

    #[error("cannot compute metrics of an all-zero image")]
    EmptyImage,

    #[error("echo cube is inconsistent with the schedule: {0}")]
    CubeMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
