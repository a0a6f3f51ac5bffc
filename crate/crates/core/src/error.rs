use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch {
        expected: usize,
        got: usize,
    },
    InvalidDomain(String),
    InvalidGrid(String),
    InvalidArgument(String),
    /// A point that must lie in the closed domain does not.
    OutsideClosure,
    /// Normals were requested at a point farther than the boundary tolerance
    /// from the boundary. `gap` is positive outside, negative inside.
    NotOnBoundary {
        gap: f64,
    },
    ProjectionFailed {
        residual: f64,
    },
    PicardNotConverged {
        iterations: usize,
        residual: f64,
    },
    /// The initial-law scaling does not make the initial point exponentially
    /// concentrated at `x0`.
    InitialLawNotConcentrated(String),
    NotConvertible(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::InvalidDomain(msg) => write!(f, "invalid domain: {msg}"),
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::OutsideClosure => write!(f, "point lies outside the closed domain"),
            Error::NotOnBoundary { gap } if *gap > 0.0 => {
                write!(f, "point is exterior to the domain by {gap:e}")
            }
            Error::NotOnBoundary { gap } => {
                write!(f, "point is interior to the domain by {:e}", -gap)
            }
            Error::ProjectionFailed { residual } => {
                write!(f, "projection root-find did not converge (residual {residual:e})")
            }
            Error::PicardNotConverged { iterations, residual } => {
                write!(f, "Picard iteration did not converge in {iterations} iterations (residual {residual:e})")
            }
            Error::InitialLawNotConcentrated(msg) => write!(
                f,
                "initial law violates the exponential concentration condition \
                 (eps*log P(|X0 - x0| > delta) -> -inf): {msg}"
            ),
            Error::NotConvertible(msg) => write!(f, "event has no matching target: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
