use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    QubitMismatch { left: u32, right: u32 },

    #[error("n_qubits = {n} outside the supported range [{min}, {max}]")]
    QubitsOutOfRange { n: u32, min: u32, max: u32 },

    #[error("unsupported basis flavor: {0}")]
    UnsupportedFlavor(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cannot parse Pauli string {input:?}: {reason}")]
    ParsePauli { input: String, reason: String },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("basis contains imaginary strings; use a complex matrix type")]
    ComplexBasis,

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
