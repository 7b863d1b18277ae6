use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),

    #[error("invalid interval [{lower}, {upper}]: {reason}")]
    InvalidInterval {
        lower: f64,
        upper: f64,
        reason: &'static str,
    },

    /// The interval has (numerically) zero probability under the current parameters.
    #[error("interval [{lower}, {upper}] has probability below 1e-300 (row {row:?})")]
    DegenerateInterval {
        lower: f64,
        upper: f64,
        row: Option<usize>,
    },

    #[error("need at least two distinct values, got {0}")]
    NotEnoughDistinctValues(usize),

    #[error("line search could not bracket a root within {limit} scale units")]
    LineSearchBracketFailure { limit: f64 },

    #[error("no finite root: target probability {0} is outside (0, 1)")]
    UnboundedRoot(f64),

    #[error("operation requires uncensored outcomes (row {row})")]
    UncensoredOnly { row: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("validation set is empty")]
    EmptyValidation,

    #[error("subset has {size} rows, fewer than the minimum {min}")]
    SubsetTooSmall { size: usize, min: usize },

    #[error("group bounds must be strictly increasing")]
    NonMonotoneBounds,

    #[error("custom loss grid is empty")]
    EmptyLossGrid,

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("model document: {0}")]
    Format(String),
}

impl Error {
    /// Attach a training row index to a degenerate-interval error.
    pub fn with_row(self, row: usize) -> Self {
        match self {
            Error::DegenerateInterval { lower, upper, .. } => Error::DegenerateInterval {
                lower,
                upper,
                row: Some(row),
            },
            other => other,
        }
    }

    /// True for failures caused by the numerics rather than the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateInterval { .. }
                | Error::LineSearchBracketFailure { .. }
                | Error::UnboundedRoot(_)
        )
    }
}
