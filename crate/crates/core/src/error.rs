use std::path::PathBuf;

use num_complex::Complex64;

/// Errors produced anywhere in the reduction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shift {0} is an eigenvalue of the system matrix (singular resolvent)")]
    SingularShift(Complex64),

    #[error("shifted operator I - ({shift})A is numerically singular{}", stage.map(|s| format!(" at stage {s}")).unwrap_or_default())]
    SingularShiftedOperator { shift: Complex64, stage: Option<usize> },

    #[error("dense oracle refused: dimension {size} exceeds cap {cap}")]
    OracleTooLarge { size: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown tableau `{0}`")]
    UnknownTableau(String),

    #[error("invalid tableau: {0}")]
    InvalidTableau(String),

    #[error("ADI parameter {0} must lie in the open right half-plane")]
    InvalidAdiParameter(Complex64),

    #[error("ADI shift {0} must have negative real part")]
    InvalidAdiShift(Complex64),

    #[error("time step size {0} must be positive and finite")]
    InvalidStepSize(f64),

    #[error("stage equations not uniquely solvable for (step, tableau eigenvalue, system eigenvalue) = {0:?}")]
    EigConditionViolated(Vec<(usize, usize, usize)>),

    #[error("rank deficient: numerical rank {rank}, required {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("low-rank factor has no columns")]
    EmptyFactor,

    #[error("generating shifts are not closed under conjugation: {0}")]
    UnpairedShifts(String),

    #[error("system not stable: eigenvalue with real part {0:e}")]
    NotStable(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
