use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: max asymmetry {asymmetry:e} exceeds tolerance {tol:e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("matrix is not row-stochastic: row {row} sums to {sum} (or has a negative entry)")]
    NotStochastic { row: usize, sum: f64 },

    #[error("chain is reducible: {0}")]
    Reducible(String),

    #[error("chain is not reversible: detailed-balance residual {residual:e} exceeds {tol:e}")]
    NotReversible { residual: f64, tol: f64 },

    #[error("symmetrized kernel has negative eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("trajectory too short: length {len}, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotStochastic { .. } => "NotStochastic",
            Error::Reducible(_) => "Reducible",
            Error::NotReversible { .. } => "NotReversible",
            Error::NotPositive { .. } => "NotPositive",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::DegenerateData(_) => "DegenerateData",
            Error::TooShort { .. } => "TooShort",
            Error::Format(_) => "FormatError",
            Error::Validation(_) => "ValidationError",
            Error::Json(_) => "JsonError",
            Error::Io(_) => "IoError",
        }
    }

    /// Whether the error means the input was rejected (as opposed to a
    /// failure while processing valid input).
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::NoConvergence { .. } | Error::DegenerateData(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
