use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate envelope: ‖F‖_Q,2 = 0")]
    DegenerateEnvelope,
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("covariance badly conditioned: factorization failed up to ridge {max_ridge:e}")]
    BadlyConditioned { max_ridge: f64 },
    #[error("σ̲ = 0 at grid point {index} (x = {x:?})")]
    ZeroVariance { index: usize, x: Vec<f64> },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures caused by numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BadlyConditioned { .. } | Error::ZeroVariance { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
