use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    /// Every case subproblem of a KS bound was infeasible. Boxes built from a
    /// common contamination construction never trigger this.
    #[error("all {count} subproblems of the {bound} bound are infeasible")]
    AllSubproblemsInfeasible { bound: &'static str, count: usize },

    #[error("linear program for {context} failed: {reason}")]
    LpFailure { context: String, reason: String },

    #[error("divergence is not finite for coalition {coalition:#b}")]
    NonFiniteDivergence { coalition: u32 },

    #[error("model prediction failed for coalition {coalition:#b}: {source}")]
    Model {
        coalition: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("csv error at row {row}, column {column}: {message}")]
    CsvValue {
        row: usize,
        column: String,
        message: String,
    },

    #[error("csv row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
