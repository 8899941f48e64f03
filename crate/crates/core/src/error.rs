use thiserror::Error;

/// Errors raised by validation and numerical routines.
///
/// Residual-carrying variants report the size of the violated invariant so
/// callers can tell a near miss from a gross error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max asymmetry {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("trace is not one (residual {residual:e})")]
    TraceNotOne { residual: f64 },

    #[error("measurement elements do not sum to the identity (residual {residual:e})")]
    CompletenessViolation { residual: f64 },

    #[error("measurement is not projective (residual {residual:e})")]
    NotProjective { residual: f64 },

    #[error("block column is not an isometry (residual {residual:e})")]
    NotIsometry { residual: f64 },

    #[error("matrix is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("twist {index} is not a unitary of matching dimension (residual {residual:e})")]
    NotUnitaryTwist { index: usize, residual: f64 },

    #[error("vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("rank {rank} is outside 1..={dim}")]
    BadRank { rank: usize, dim: usize },

    #[error("bad dimension: {0}")]
    BadDimension(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("likelihood is flat (classical Fisher information {cfi:e})")]
    FlatLikelihood { cfi: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

impl Error {
    /// True for errors caused by the numerics rather than by invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalFailure(_) | Error::FlatLikelihood { .. })
    }

    /// Variant name, stable for machine consumption.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NotPsd { .. } => "NotPsd",
            Error::TraceNotOne { .. } => "TraceNotOne",
            Error::CompletenessViolation { .. } => "CompletenessViolation",
            Error::NotProjective { .. } => "NotProjective",
            Error::NotIsometry { .. } => "NotIsometry",
            Error::NotUnitary { .. } => "NotUnitary",
            Error::NotUnitaryTwist { .. } => "NotUnitaryTwist",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::BadRank { .. } => "BadRank",
            Error::BadDimension(_) => "BadDimension",
            Error::Empty(_) => "Empty",
            Error::NonFinite { .. } => "NonFinite",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::FlatLikelihood { .. } => "FlatLikelihood",
            Error::NumericalFailure(_) => "NumericalFailure",
        }
    }

    /// Size of the violated invariant, where the variant carries one.
    pub fn residual(&self) -> Option<f64> {
        match *self {
            Error::NotHermitian { residual }
            | Error::TraceNotOne { residual }
            | Error::CompletenessViolation { residual }
            | Error::NotProjective { residual }
            | Error::NotIsometry { residual }
            | Error::NotUnitary { residual }
            | Error::NotUnitaryTwist { residual, .. } => Some(residual),
            Error::NotPsd { min_eigenvalue } => Some(min_eigenvalue),
            Error::NotNormalized { norm } => Some((norm - 1.0).abs()),
            Error::FlatLikelihood { cfi } => Some(cfi),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
