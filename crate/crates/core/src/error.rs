use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A system that must be inverted is numerically singular.
    #[error("singular {what}: condition number {condition:e}")]
    Singular { what: &'static str, condition: f64 },

    #[error("zero matrix has no orthonormal basis")]
    ZeroMatrix,

    #[error("training diverged at step {step}: loss {loss:e}")]
    Divergence { step: usize, loss: f64 },
}

impl Error {
    /// True for failures caused by the numbers rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::Divergence { .. })
    }
}

pub(crate) fn ensure_dims(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(msg()))
    }
}
