use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("register width mismatch: {0} vs {1}")]
    WidthMismatch(usize, usize),

    #[error("register of {width} qubits exceeds the dense limit of {limit}")]
    TooWide { width: usize, limit: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid Pauli label: {0}")]
    InvalidLabel(String),

    #[error("identity-only Pauli string cannot be exponentiated as a circuit")]
    IdentityExponential,

    #[error("non-Hermitian coefficient on {0}")]
    NonHermitian(String),

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("non-native gate in circuit: {0}")]
    NonNative(String),

    #[error("channel is not CPTP (deviation {0:e})")]
    NotCptp(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("integration drift: {0}")]
    Drift(String),

    #[error("time grids are not aligned: {0}")]
    GridMismatch(String),

    #[error("singular confusion matrix on qubit {0}")]
    SingularConfusion(usize),

    #[error("missing calibration: {0}")]
    MissingCalibration(String),

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("circuit text parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration errors:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("NaN in output column `{column}` (row {row})")]
    NanOutput { column: String, row: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
