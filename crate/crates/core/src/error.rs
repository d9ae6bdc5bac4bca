use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate {value} lies outside the unit interval")]
    Domain { value: f64 },

    #[error("index {index} out of bounds for mode {mode} of size {size}")]
    IndexOutOfBounds { mode: usize, index: usize, size: usize },

    #[error("invalid ring: {0}")]
    InvalidRing(String),

    #[error("mode size mismatch: {0}")]
    ModeMismatch(String),

    #[error("weight vector for dimension {dim} has length {got}, expected {expected}")]
    WeightLength { dim: usize, got: usize, expected: usize },

    #[error("dense size {size} exceeds the limit of {limit} entries")]
    SizeBound { size: usize, limit: usize },

    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("inconsistent query: {0}")]
    InconsistentQuery(String),

    #[error("conditional distribution of data dimension {dim} has no mass")]
    DegenerateConditional { dim: usize },

    #[error("sample plan was built for model version {plan}, model is at version {model}")]
    StalePlan { plan: u64, model: u64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("total mass is zero")]
    ZeroMass,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("unknown toy family `{0}`")]
    UnknownFamily(String),

    #[error("row {row}, column {column}: cannot parse `{cell}` as a number")]
    Parse { row: usize, column: usize, cell: String },

    #[error("row {row} has {got} columns, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },

    #[error("column {column} has zero variance")]
    ZeroVariance { column: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("histogram KL is limited to at most 3 dimensions, got {0}")]
    TooManyDimensions(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
