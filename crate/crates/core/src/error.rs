use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is numerically singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("point outside the domain: {0}")]
    Domain(String),
    #[error("gamma law of shape 0 is an atom at the origin and has no density")]
    AtomNotRepresentable,
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("rate regime not supported here: {0}")]
    Regime(String),
    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),
    #[error("quadrature did not converge (coarse {coarse}, fine {fine})")]
    Accuracy { coarse: f64, fine: f64 },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Dimension(_)
            | Error::Domain(_)
            | Error::AtomNotRepresentable
            | Error::Regime(_) => 2,
            Error::Capability(_) => 3,
            Error::Singular { .. } | Error::NumericalConsistency(_) | Error::Accuracy { .. } => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
