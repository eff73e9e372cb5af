use std::fmt;

use crate::hs::PositivityClass;
use crate::posdecomp::DecompositionTrace;

/// Which hypothesis of an inner-product construction failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// The factor lists are empty or have different lengths.
    Arity,
    /// A factor that must be positive semidefinite is not.
    NotPsd,
    /// A factor that must be positive definite is not.
    NotPd,
    /// The kernels of the semidefinite factors share a nonzero vector.
    KernelIntersection,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::Arity => write!(f, "factor lists must be nonempty and of equal length"),
            Hypothesis::NotPsd => write!(f, "factor is not positive semidefinite"),
            Hypothesis::NotPd => write!(f, "factor is not positive definite"),
            Hypothesis::KernelIntersection => {
                write!(
                    f,
                    "kernels of the semidefinite factors intersect nontrivially"
                )
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index ({row}, {col}) out of range for dimension {dim}")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    Schema(String),

    #[error("operation takes exactly {expected} term(s), found {found}")]
    Arity { expected: usize, found: usize },

    #[error("superoperator is not selfadjoint (relative defect {defect:.3e})")]
    NotSelfadjoint { defect: f64 },

    #[error("superoperator is not positive ({class}, lambda_min = {lambda_min:.6e})")]
    NotPositive {
        class: PositivityClass,
        lambda_min: f64,
    },

    #[error("superoperator is not positive definite ({class}, lambda_min = {lambda_min:.6e})")]
    NotPositiveDefinite {
        class: PositivityClass,
        lambda_min: f64,
    },

    #[error("degenerate factor: {0}")]
    DegenerateFactor(String),

    #[error("no progress in {stage}")]
    NoProgress {
        stage: String,
        trace: Box<DecompositionTrace>,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("zeta certificate is invalid")]
    CertificateInvalid,

    #[error("hypothesis violated{}: {reason}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    HypothesisViolated {
        index: Option<usize>,
        reason: Hypothesis,
    },

    #[error("form {which} does not define an inner product")]
    NotInnerProduct { which: usize },
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::NonFinite => "NonFinite",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Schema(_) => "Schema",
            Error::Arity { .. } => "Arity",
            Error::NotSelfadjoint { .. } => "NotSelfadjoint",
            Error::NotPositive { .. } => "NotPositive",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::DegenerateFactor(_) => "DegenerateFactor",
            Error::NoProgress { .. } => "NoProgress",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::CertificateInvalid => "CertificateInvalid",
            Error::HypothesisViolated { .. } => "HypothesisViolated",
            Error::NotInnerProduct { .. } => "NotInnerProduct",
        }
    }

    /// Numerical failures (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotSelfadjoint { .. }
                | Error::NotPositive { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::DegenerateFactor(_)
                | Error::NoProgress { .. }
                | Error::NotInnerProduct { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
