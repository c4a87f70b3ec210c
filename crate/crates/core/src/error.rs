use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("unitary does not have determinant one (|det - 1| = {residual:.3e})")]
    NotSpecial { residual: f64 },
    #[error("matrix is not a proper rotation: {0}")]
    NotRotation(String),
    #[error("matrix is not symmetric (max asymmetry {residual:.3e})")]
    NotSymmetric { residual: f64 },
    #[error("matrix is not hermitian (max asymmetry {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),
    #[error("invalid type matrix: {0}")]
    InvalidType(String),
    #[error("invalid coupling matrix: {0}")]
    InvalidCoupling(String),
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coupling is zero, nothing to invert")]
    ZeroCoupling,
    #[error("type matrix is zero, nothing to invert")]
    ZeroType,
    #[error("coupling is case {found}, expected case {expected}")]
    WrongCase { expected: String, found: String },
    #[error("no Sylvester Hadamard matrix of order {0}")]
    UnsupportedOrder(usize),
    #[error("bound does not apply: {0}")]
    BoundNotApplicable(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("scheme does not verify (residual {residual:.3e} > {tol:.1e})")]
    NotVerified { residual: f64, tol: f64 },
    #[error("{n} spins exceed the dense simulation cap of {max}")]
    TooManySpins { n: usize, max: usize },
    #[error("degenerate error fit: {0}")]
    DegenerateFit(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
