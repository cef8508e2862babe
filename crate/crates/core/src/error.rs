use thiserror::Error;

/// Everything that can go wrong while building or transforming operators.
///
/// Physicality violations (negativity, trace, completeness) are reported with
/// the measured deviation so callers can tell numerical dust from real bugs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ambient dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("operator is not Hermitian: max |M - M*| = {dev:.3e} (tolerance {tol:.1e})")]
    NotHermitian { dev: f64, tol: f64 },

    #[error("operator has a negative eigenvalue {min:.6e} beyond tolerance")]
    NotPsd { min: f64 },

    #[error("trace is {trace:.12e}, expected {expected} within {tol:.1e}")]
    BadTrace {
        trace: f64,
        expected: f64,
        tol: f64,
    },

    #[error("eigendecomposition round-trip residual {residual:.3e} exceeds {tol:.1e}")]
    EigenResidual { residual: f64, tol: f64 },

    #[error("label {0:?} not found in layout")]
    UnknownLabel(String),

    #[error("duplicate label {0:?} in layout")]
    DuplicateLabel(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Kraus family deviates from completeness by {dev:.3e} (tolerance {tol:.1e})")]
    Completeness { dev: f64, tol: f64 },

    #[error("probability vector sums to {0:.12e}, expected 1")]
    ProbabilitySum(f64),

    #[error("{0}")]
    Domain(String),

    #[error("numerical assertion failed: {0}")]
    NumericalAssertion(String),

    #[error("serialization: {0}")]
    Serialization(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Shorthand for precondition violations described in prose.
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
