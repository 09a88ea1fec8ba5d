use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Model or graph parameters violate a precondition.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An exact-enumeration size guard was hit. The oracles are ground
    /// truth, never a production path, so these limits are hard.
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    /// The requested quantity is undefined in this parameter regime.
    #[error("regime error: {0}")]
    Regime(String),

    /// A run descriptor or config document failed validation.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
