use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("argument {value} outside the tabulated range [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("quadrature did not reach tolerance (estimated error {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("{key}: {reason}")]
    Config { key: String, reason: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("{0}")]
    Runtime(String),

    #[error("run diverged at t = {}: {detail}", last_state.t)]
    Diverged {
        detail: String,
        last_state: Box<crate::simulator::State>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. } | Error::Config { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
