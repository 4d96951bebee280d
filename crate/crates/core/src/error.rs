use thiserror::Error;

/// Errors raised anywhere in the pre-processing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset has no records")]
    EmptyDataset,

    #[error("record {0} has no outcome value")]
    MissingOutcome(usize),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("distributions have different supports: {0} vs {1} cells")]
    SupportMismatch(usize, usize),

    #[error("reference probability is zero ({0})")]
    ZeroReference(String),

    #[error("no distortion budget defined for cell {0}")]
    MissingBudget(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid probability mass: {0}")]
    InvalidPmf(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: {0} vs {1} records")]
    LengthMismatch(usize, usize),

    #[error("budget mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("kernel provenance {found} does not match configuration {expected}")]
    ProvenanceMismatch { expected: String, found: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
