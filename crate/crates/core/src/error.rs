use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("unsupported register size {0} (expected 1..=3 qubits)")]
    RegisterSize(usize),

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("non-finite value at epoch {epoch}: {detail}")]
    NonFinite { epoch: usize, detail: String },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
