use thiserror::Error;

/// Errors raised by the tensor-network, oracle and benchmark layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("Krylov exponential did not converge within {dim} vectors (last update {update:.3e})")]
    NotConverged { dim: usize, update: f64 },

    #[error("integrator failed at site {site}: {source}")]
    Integrator {
        site: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("linear algebra backend: {0}")]
    Backend(#[from] ndarray_linalg::error::LinalgError),

    #[error("configuration: {0}")]
    Config(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
