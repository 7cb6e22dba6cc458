use std::fmt;

/// Errors produced by the Gaussian algebra, model evaluation and filters.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A required matrix inverse does not exist or is too ill-conditioned
    /// (estimated condition number above [`crate::linalg::COND_LIMIT`]).
    SingularMatrix { context: &'static str, cond: f64 },
    /// Operand shapes are incompatible.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// A requested index range lies outside the dimension of the value.
    IndexOutOfRange { index: usize, dim: usize },
    /// An operation requiring at least one element received none.
    EmptyInput(&'static str),
    /// Mixture weights sum to zero.
    ZeroTotalWeight,
    /// A matrix required to be positive semidefinite has an eigenvalue below
    /// the tolerated floor.
    NotPsd { context: &'static str, min_eig: f64 },
    /// A model Jacobian was requested at a point where it does not exist.
    NonDifferentiablePoint(&'static str),
    /// Every particle weight collapsed to zero (filter divergence); `step` is
    /// the recursion index at which it happened.
    AllZeroWeights { step: usize },
    /// Construction-time parameter validation failed.
    InvalidParams(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SingularMatrix { context, cond } => {
                write!(f, "singular matrix in {context} (cond ~ {cond:.3e})")
            }
            Error::DimensionMismatch {
                context,
                expected,
                got,
            } => write!(
                f,
                "dimension mismatch in {context}: expected {expected}, got {got}"
            ),
            Error::IndexOutOfRange { index, dim } => {
                write!(f, "index {index} out of range for dimension {dim}")
            }
            Error::EmptyInput(context) => write!(f, "empty input to {context}"),
            Error::ZeroTotalWeight => write!(f, "mixture weights sum to zero"),
            Error::NotPsd { context, min_eig } => write!(
                f,
                "matrix in {context} is not positive semidefinite (min eigenvalue {min_eig:.3e})"
            ),
            Error::NonDifferentiablePoint(context) => {
                write!(f, "non-differentiable point in {context}")
            }
            Error::AllZeroWeights { step } => {
                write!(f, "all particle weights are zero at step {step}")
            }
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
