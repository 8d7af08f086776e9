use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("non-finite amplitudes after step {step}; the time step is too large")]
    NonFinite { step: usize },

    #[error("operator is not Hermitian (max |A - A^H| = {0:e})")]
    NotHermitian(f64),

    #[error("density matrix trace drifted to {0}")]
    TraceDrift(f64),

    #[error("measurement record does not match the model: {0}")]
    RecordMismatch(String),

    #[error("Wigner grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("incomplete run directory {0}")]
    IncompleteRun(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(path: impl AsRef<std::path::Path>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            reason: reason.into(),
        }
    }
}
