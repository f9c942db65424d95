use thiserror::Error;

/// Failures raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid trap potential: {0}")]
    InvalidPotential(String),
    #[error("grid too narrow: state {state} has boundary amplitude {amplitude:.3e}")]
    GridTooNarrow { state: usize, amplitude: f64 },
    #[error("eigensolver did not converge: {0}")]
    EigenNotConverged(String),
    #[error("cannot identify tunneling doublets: {0}")]
    DoubletIdentification(String),
    #[error("basis dimension {dim} exceeds cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },
    #[error("unsupported mode count {0} (expected 2 or 4)")]
    ModeCount(usize),
    #[error("ket violates basis constraint: {0}")]
    ConstraintViolation(String),
    #[error("operator/basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("non-Hermitian input: {0}")]
    NonHermitian(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Krylov propagation failed: {0}")]
    KrylovNotConverged(String),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
