use thiserror::Error;

/// Errors raised anywhere in the simulation and experiment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("estimator precondition violated: {0}")]
    Estimator(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
