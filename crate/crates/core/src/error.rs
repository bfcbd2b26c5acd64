use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("component {index} is negative ({value})")]
    NegativeComponent { index: usize, value: f64 },

    #[error("component {index} is not finite")]
    NonFiniteComponent { index: usize },

    #[error("components sum to {sum}, outside tolerance {tolerance} of 1")]
    SumOutOfTolerance { sum: f64, tolerance: f64 },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("duplicate unit id `{0}`")]
    DuplicateId(String),

    #[error("unit `{unit}`: weight {index} is invalid ({value})")]
    InvalidWeight { unit: String, index: usize, value: f64 },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("dataset has no units")]
    EmptyDataset,

    #[error("cluster has no members")]
    EmptyCluster,

    #[error("unit index {0} is not part of the dataset")]
    UnknownMember(usize),

    #[error("clusters share unit index {0}")]
    OverlappingClusters(usize),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("k = {k} exceeds the number of units n = {n}")]
    KExceedsN { k: usize, n: usize },

    #[error("k = {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("hierarchical clustering needs at least two units, got {0}")]
    FewerThanTwoUnits(usize),

    #[error("population must be positive, got {0}")]
    ZeroPopulation(f64),

    #[error("deaths must be finite and nonnegative, got {0}")]
    InvalidDeaths(f64),

    #[error("standard population must be positive, got {0}")]
    InvalidStdPopulation(f64),

    #[error("cannot parse ICD code `{0}`")]
    UnparseableCode(String),

    #[error("invalid ICD range `{0}`")]
    InvalidRange(String),

    #[error("category `{0}` is not in the category schema")]
    UnknownCategory(String),

    #[error("age group `{0}` missing from the one-dimensional standard population")]
    MissingAgeGroup(String),

    #[error("gender share {0} must lie strictly between 0 and 1")]
    DegenerateShare(f64),

    #[error("no standard population entry for variable `{0}`")]
    MissingStdEntry(String),

    #[error("conflicting population values for ({country}, {variable}): {first} vs {second}")]
    InconsistentPopulation {
        country: String,
        variable: String,
        first: f64,
        second: f64,
    },

    #[error("variable `{0}` is not in the variable schema")]
    UnmappedVariable(String),

    #[error("no records for ({country}, {variable})")]
    MissingCell { country: String, variable: String },

    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by malformed or unreadable input, as opposed to
    /// well-formed input that violates a modelling constraint.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Format(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Io(_)
                | Error::UnparseableCode(_)
                | Error::InvalidRange(_)
        )
    }
}
