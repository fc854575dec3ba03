use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch in {context}: expected {expected}, got {actual}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("spectrum kind mismatch: expected {expected}, got {actual}")]
    KindMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("grid mismatch between interferograms")]
    GridMismatch,

    #[error("Hermitian extension broken: imaginary residue {residue:e} at DC/Nyquist exceeds {limit:e}")]
    ImaginaryResidue { residue: f64, limit: f64 },

    #[error("sample count {m} out of range for {n} temporal points")]
    SampleCountOutOfRange { m: usize, n: usize },

    #[error("no spectral bins selected: {0}")]
    NoBinsSelected(&'static str),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("line fit failed: {0}")]
    FitFailure(String),

    #[error("unknown species `{0}`")]
    UnknownSpecies(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: row {row}: {message}")]
    Validation {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("bad magic bytes in {0}")]
    BadMagic(PathBuf),

    #[error("truncated payload in {path}: expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from user input (config, usage) rather than a
    /// runtime or numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidRange(_)
                | Error::InvalidParameter { .. }
                | Error::UnknownSpecies(_)
                | Error::SampleCountOutOfRange { .. }
        )
    }
}
