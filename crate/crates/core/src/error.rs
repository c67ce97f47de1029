use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("target location ({x:.3}, {y:.3}) deg does not fit inside the noise disk")]
    TargetOutsideDisk { x: f64, y: f64 },
    #[error("root bracket not found: {0}")]
    NoBracket(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("posterior underflow: all probabilities vanished")]
    PosteriorUnderflow,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown layer kind `{0}`")]
    UnknownLayer(String),
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
