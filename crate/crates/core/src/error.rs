use thiserror::Error;

#[derive(Debug, Error)]
pub enum JopError {
    #[error("operation undefined for the zero polynomial")]
    ZeroPolynomial,

    #[error("weight is not integrable: {0}")]
    NonIntegrable(String),

    #[error("iteration did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("moment table holds moments up to order {available}, order {needed} required")]
    InsufficientMoments { needed: usize, available: usize },

    #[error("intervals ({}, {}) and ({}, {}) overlap", .left.0, .left.1, .right.0, .right.1)]
    OverlappingIntervals { left: (f64, f64), right: (f64, f64) },

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("direct quadrature oracle supports k <= 3, got k = {0}")]
    UnsupportedDimension(usize),

    #[error("pencil solver requires k = 2, got k = {0}")]
    NotK2(usize),

    #[error("Cholesky factorization failed: Gram matrix is not positive definite")]
    CholeskyFailure,

    #[error("found {found} distinct eigenpairs, expected {expected}")]
    IncompleteSystem { found: usize, expected: usize },

    #[error("eigenvalue formula vanishes identically for this vector")]
    DegenerateVector,

    #[error("selected roots of unity are not distinct")]
    DuplicateRoots,

    #[error("operator has non-real eigenvalue {re} + {im}i")]
    ComplexEigenvalues { re: f64, im: f64 },

    #[error("Van Vleck division left relative remainder {0:e}")]
    DivisionRemainder(f64),

    #[error("{equations} equations cannot determine {unknowns} unknowns")]
    UnderdeterminedSystem { equations: usize, unknowns: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, JopError>;
