use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid functions live on different domains")]
    DomainMismatch,

    #[error("non-finite sample at cell ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("scale out of range: {0}")]
    ScaleRange(String),

    #[error("sparse construction failed: worst ratio {worst_ratio:.4} < target {target} after {escalations} escalations")]
    SparseFailure {
        worst_ratio: f64,
        target: f64,
        escalations: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
