use thiserror::Error;

#[derive(Debug, Error)]
pub enum FcmError {
    #[error("point or coordinate outside the valid domain: {0}")]
    OutOfDomain(String),
    #[error("invalid configuration: {0}")]
    Configuration(String),
    #[error("unsupported cut topology in element {element}: {reason}")]
    UnsupportedTopology { element: usize, reason: String },
    #[error("no active basis functions")]
    EmptySpace,
    #[error("problem data returned a non-finite value at ({x}, {y})")]
    Data { x: f64, y: f64 },
    #[error("singular system: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },
    #[error("indefinite system: {0}")]
    IndefiniteSystem(String),
    #[error("solver did not reach tolerance: relative residual {residual:e} > {tolerance:e}")]
    ToleranceNotMet { residual: f64, tolerance: f64 },
    #[error("problem too large for dense eigensolver: n = {n} > {limit}")]
    Capability { n: usize, limit: usize },
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FcmError> = std::result::Result<T, E>;
