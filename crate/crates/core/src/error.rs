use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("cutoff too small: tail mass {tail_mass:.3e} above n = {from} (ncut = {ncut})")]
    Cutoff {
        ncut: usize,
        from: usize,
        tail_mass: f64,
    },

    #[error("capacity exceeded: {what} needs {requested}, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("quadrature did not converge: estimated error {error:.3e} after {panels} panels")]
    Quadrature { error: f64, panels: usize },

    #[error("invalid config: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
