use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("space dimension must be at least 1")]
    EmptySpace,

    #[error("matrix is not Hermitian: |S - S^H| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("matrix is not positive: minimum eigenvalue {min_eigenvalue:.6e} below -{tolerance:.3e}")]
    NotPositive { min_eigenvalue: f64, tolerance: f64 },

    #[error("real part S + conj(S) is degenerate (minimum eigenvalue {min_eigenvalue:.3e})")]
    DegenerateRealPart { min_eigenvalue: f64 },

    #[error("ratio operator has spectrum at the boundary {{0, 1}} (eigenvalue {eigenvalue:.6e})")]
    BoundarySpectrum { eigenvalue: f64 },

    #[error("ratio operator has eigenvalue 1/2 (eigenvalue {eigenvalue:.6e}); form is not center-free")]
    CenterNotFree { eigenvalue: f64 },

    #[error("scaling parameter must be positive, got {0}")]
    NonPositiveR(f64),

    #[error("form function section '{label}' is unbounded or non-finite (value {value:e} at s = {at})")]
    UnboundedSection { label: String, value: f64, at: f64 },

    #[error("unknown form function '{0}'")]
    UnknownFunction(String),

    #[error("form function '{0}' requires a parameter")]
    MissingParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Liouville measure requires a non-degenerate alternating form ({degenerate_dim} degenerate directions)")]
    MeasureMismatch { degenerate_dim: usize },

    #[error("Gaussian element is not isotropic on block {block} of the twisted algebra context")]
    BlockMismatch { block: usize },

    #[error("quadrature error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    GridTooCoarse { estimate: f64, tolerance: f64 },

    #[error("operator C^r + conj(C)^r is singular")]
    SingularDenominator,

    #[error("covariance operator must satisfy 0 <= C <= 1 (eigenvalue {eigenvalue:.6e})")]
    OutOfUnitInterval { eigenvalue: f64 },

    #[error("C does not commute with conj(C): |[C, conj C]| = {deviation:.3e}")]
    NonCommuting { deviation: f64 },

    #[error("limit tables need conj(C) = 1 - C (deviation {deviation:.3e})")]
    NotComplementary { deviation: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
