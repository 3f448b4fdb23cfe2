//! Crate-wide error type. Residual magnitudes are reported as `f64`
//! regardless of the working scalar.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("linear map does not descend to the quotient: longitudinal residual {residual:.3e}")]
    NotWellDefined { residual: f64 },

    #[error("arrows not composable: source/target mismatch {residual:.3e}")]
    NotComposable { residual: f64 },

    #[error("malformed arrow: {context} (residual {residual:.3e})")]
    MalformedArrow { context: String, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("type mismatch: {0}")]
    Typing(String),

    #[error("operation not supported here: {0}")]
    Unsupported(String),

    #[error("check is undetermined: {0}")]
    Undetermined(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
