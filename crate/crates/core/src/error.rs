use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The joint action space (or a profile enumeration) is larger than the
    /// configured cap, so the dense exact path is unavailable.
    #[error("too large for exact path: {what} has {size} entries, cap is {cap}")]
    TooLarge {
        what: &'static str,
        size: u128,
        cap: u128,
    },

    #[error("potential ascent violated at iteration {iteration}: potential fell by {drop:e}")]
    Divergence { iteration: usize, drop: f64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for CoreError {
    fn from(e: std::io::Error) -> Self {
        CoreError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CoreError {
    fn from(e: serde_json::Error) -> Self {
        CoreError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
