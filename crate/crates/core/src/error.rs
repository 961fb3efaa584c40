use thiserror::Error;

/// Errors raised by the spectral kernels, the solvers and the experiment engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, parameters or mismatched operands.
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite value appeared in a computation that should stay finite.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A time integration produced non-finite values.
    #[error("numerical blow-up at t = {time}: {what}")]
    BlowUp { time: f64, what: String },

    /// Sampled data is not small enough at the edge of the periodic box.
    #[error("tail check failed: edge magnitude {edge:.3e} exceeds {limit:.3e}; enlarge side_length")]
    TailCheck { edge: f64, limit: f64 },

    /// A profile was requested at a time it was not solved to.
    #[error("no profile sample at t = {0}; re-solve to that time instead of interpolating")]
    MissingTime(f64),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
