use std::path::PathBuf;

/// Every failure the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("grid size {size} exceeds the cap of {cap} points")]
    Size { size: usize, cap: usize },

    #[error("point outside the grid: {0}")]
    Domain(String),

    #[error("kernel error: {0}")]
    Kernel(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("block encoding failed verification: residual {residual:.3e} > {delta:.3e}")]
    Construction { residual: f64, delta: f64 },

    #[error("spectrum {min_eigenvalue:.6e} lies below the floor 1/kappa = {floor:.6e}")]
    Condition { min_eigenvalue: f64, floor: f64 },

    #[error("post-selection probability {0:.3e} is degenerate")]
    Degenerate(f64),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(message: impl Into<String>) -> Error {
    Error::Argument(message.into())
}
