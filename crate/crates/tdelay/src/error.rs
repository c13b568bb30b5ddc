use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("symmetry index beta={0} is not supported here")]
    UnsupportedSymmetry(u8),

    #[error("moment diverges for beta*N = {0} (requires beta*N > 2)")]
    DivergentMoment(u32),

    #[error("matrix (I + S) is near-singular: min |1 + e^(i theta)| = {0:.3e}")]
    NearSingular(f64),

    #[error("Jacobi iteration did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("function not finite at eigenvalue {0}")]
    Domain(f64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("quadrature failed to reach tolerance: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("precision loss: cancellation ratio {ratio:.3e} exceeds limit")]
    PrecisionLoss { ratio: f64 },

    #[error("histogram edges do not match")]
    EdgeMismatch,

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("parse error at `{token}`: {reason}")]
    Parse { token: String, reason: String },

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
