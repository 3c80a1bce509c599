use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid rate target {0}: must be strictly positive")]
    InvalidTarget(f64),
    #[error("complex channel data supplied to a real-field template")]
    FieldMismatch,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("solver did not reach a verdict within {0} iterations")]
    SolverInconclusive(usize),
    #[error("channel matrix is rank deficient")]
    DegenerateChannel,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
