use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max imaginary part {0:e})")]
    NotHermitian(f64),

    #[error("system of {n} qubits exceeds the dense cap of {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("invalid qubit subset: {0}")]
    InvalidSubset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("class quota unreachable after {attempts} draws (counts so far {counts:?})")]
    QuotaUnreachable { attempts: usize, counts: Vec<usize> },

    #[error("Lie closure exceeded the dimension cap of {0}")]
    ClosureCapExceeded(usize),

    #[error("fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Format(e.to_string())
    }
}
