use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: asymmetry {asymmetry:e} exceeds tolerance {tolerance:e}")]
    NonSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("input contains NaN or infinite values")]
    NonFinite,

    #[error("eigensolver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("window is not full yet ({filled} of {width} columns)")]
    WindowNotFull { filled: usize, width: usize },

    #[error("window is already full ({width} columns)")]
    WindowFull { width: usize },

    #[error("all singular values are zero")]
    ZeroMatrix,

    #[error("effective rank is zero")]
    RankCollapse,

    #[error("no eigenvalue with non-zero magnitude")]
    NoViableMode,

    #[error("ground truth mask is empty")]
    EmptyGroundTruth,

    #[error("invariance violated for {quantity}: error {error:e} > tolerance {tolerance:e}")]
    InvarianceViolation {
        quantity: String,
        error: f64,
        tolerance: f64,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV failure: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Process exit code: 1 for input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonSymmetric { .. }
            | Error::NoConvergence { .. }
            | Error::ZeroMatrix
            | Error::RankCollapse
            | Error::NoViableMode
            | Error::InvarianceViolation { .. } => 2,
            _ => 1,
        }
    }
}
