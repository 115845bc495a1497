use thiserror::Error;

/// Errors raised by the estimation and inference pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("basis index {index} out of range 1..={count}")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("length mismatch: expected {expected}, found {found} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("underdetermined design: {rows} rows for {params} parameters")]
    Underdetermined { rows: usize, params: usize },

    #[error("singular design: condition number {condition:.3e} exceeds tolerance")]
    SingularDesign { condition: f64 },

    #[error("non-finite value in design matrix at row {row}, column {column}")]
    NonFiniteDesign { row: usize, column: usize },

    #[error("mean-shift functions have not been fitted")]
    MeanShiftsMissing,

    #[error("component {0} does not exist")]
    NoSuchComponent(usize),

    #[error("block length {block} invalid for {rows} rows (need 1 <= m and m + r < n)")]
    BlockLength { block: usize, rows: usize },

    #[error("simulation diverged at index {index}")]
    SimulationDivergence { index: usize },

    #[error("separable normalization |C| = {0:.3e} is degenerate")]
    DegenerateNormalization(f64),

    #[error("tuning failed: {0}")]
    TuningFailure(String),

    #[error("{failed} of {total} replicates failed, above the failure budget")]
    FailureBudget { failed: usize, total: usize },

    #[error("insufficient candidates: {found} supplied, at least {required} required")]
    InsufficientCandidates { found: usize, required: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
