use thiserror::Error;

/// Errors produced by the toolkit's library layer.
#[derive(Debug, Error)]
pub enum NilmError {
    #[error("{0}")]
    Series(String),
    #[error("{0}")]
    Ingestion(String),
    #[error("{0}")]
    Metric(String),
    #[error("{0}")]
    Disaggregation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
