use thiserror::Error;

/// Errors raised while building trees, evaluating priors or running chains.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate variable `{0}` in ordering")]
    DuplicateVariable(String),
    #[error("modeled variables must form a nonempty contiguous suffix of the ordering: {0}")]
    NonSuffixModeled(String),
    #[error("variable `{0}` has fewer than two levels")]
    SingleLevel(String),
    #[error("variable `{variable}` declares level `{level}` more than once")]
    DuplicateLevel { variable: String, level: String },
    #[error("row {row}: value `{value}` is not a declared level of `{variable}`")]
    UndeclaredLevel {
        row: usize,
        variable: String,
        value: String,
    },
    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("row {row}: `{value}` in column `{column}` is not a real number")]
    NotNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("covariate `{0}` is constant and cannot be standardized")]
    ConstantCovariate(String),
    #[error("digit {digit} out of range at position {position} (cardinality {cardinality})")]
    DigitOutOfRange {
        position: usize,
        digit: usize,
        cardinality: usize,
    },
    #[error("rank {rank} out of range at depth {depth} ({contexts} contexts)")]
    RankOutOfRange {
        rank: usize,
        depth: usize,
        contexts: usize,
    },
    #[error("contexts have different depths ({0} vs {1})")]
    DepthMismatch(usize, usize),
    #[error("distance between identical contexts is undefined")]
    IdenticalContexts,
    #[error("partitions are over different context sets ({0} vs {1} items)")]
    SizeMismatch(usize, usize),
    #[error("too many contexts for exhaustive enumeration ({0} > {1})")]
    TooManyContexts(usize, usize),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid chain configuration: {0}")]
    InvalidChain(String),
    #[error("invalid causal query: {0}")]
    InvalidQuery(String),
    #[error("invalid generating tree: {0}")]
    InvalidGenerator(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("no posterior samples")]
    NoSamples,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_)) || matches!(self, Error::Csv(e) if e.is_io_error())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
