use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A linear-algebra routine failed or produced an out-of-tolerance result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Error propagation through the trace distance is singular at D = 0.
    #[error("trace distance {distance:e} is at or below the propagation floor")]
    DegenerateDistance { distance: f64 },

    /// The dense-sampling estimate of the true measure did not settle.
    #[error(
        "true-value estimate not converged: N(100 gamma0) = {n_base}, N(200 gamma0) = {n_refined}, \
         relative change {ratio:e} >= 1e-3"
    )]
    Convergence {
        n_base: f64,
        n_refined: f64,
        ratio: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
