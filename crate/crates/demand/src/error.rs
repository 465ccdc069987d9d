use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DemandError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// Fitted moving-average polynomial has a root on or inside the unit circle.
    #[error("non-invertible MA fit: coefficients {coefficients:?}, reflection coefficients {reflection:?}")]
    NonInvertible {
        coefficients: Vec<f64>,
        reflection: Vec<f64>,
    },

    #[error("unsupported artifact: {0}")]
    Format(String),

    #[error("artifact JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DemandError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        DemandError::Domain(msg.into())
    }
}
