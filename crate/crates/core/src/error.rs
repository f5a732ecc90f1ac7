use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("statistics mismatch: {0}")]
    StatisticsMismatch(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("path count {count} exceeds the enumeration limit {limit}")]
    PathCountOverflow { count: u128, limit: u64 },
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("Fock truncation insufficient: {0}")]
    Truncation(String),
    #[error("non-Hermitian input: {0}")]
    NonHermitian(String),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

impl Error {
    /// True for failures caused by exceeding a resource limit rather than bad input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, Error::PathCountOverflow { .. } | Error::SizeLimit(_))
    }

    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::Truncation(_) | Error::Consistency(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
