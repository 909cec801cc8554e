use geocov::GeoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AquiferError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Geo(#[from] GeoError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AquiferError>;
