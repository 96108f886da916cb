use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation. `name` identifies the offending field.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error bound {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("scenario has {got} slots, expected {expected}")]
    Shape { expected: usize, got: usize },

    #[error("rejection sampling exhausted after {attempts} attempts")]
    SamplingExhausted { attempts: u64 },

    #[error("instance too large for exhaustive search: {sequences:e} candidate sequences (limit {limit:e})")]
    TooLarge { sequences: f64, limit: f64 },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("upper bound increased at iteration {iteration}: {previous:e} -> {current:e} bit/s")]
    UpperBoundIncreased {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed scenario file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
