use thiserror::Error;

/// Errors produced by the model computations.
///
/// The variants map onto the process exit codes used by the command-line
/// front end, so they stay coarse on purpose.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("size limit exceeded: {what} = {value} (max {max})")]
    SizeLimit {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("no fixed point: {0}")]
    NoFixedPoint(String),

    #[error("unresolved: {0}")]
    Unresolved(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

pub(crate) fn check_size(what: &'static str, value: usize, max: usize) -> Result<()> {
    if value > max {
        Err(Error::SizeLimit { what, value, max })
    } else {
        Ok(())
    }
}

pub(crate) fn check_finite(what: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("{what} must be finite, got {x}")))
    }
}
