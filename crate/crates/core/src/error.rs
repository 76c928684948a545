use thiserror::Error;

pub type Result<T> = std::result::Result<T, SurveyError>;

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at {path}:{line}: {message}")]
    Malformed { path: String, line: u64, message: String },
    #[error("duplicate rating for respondent {respondent} and item {item}")]
    DuplicateRating { respondent: String, item: String },
    #[error("rating {value} for respondent {respondent} is outside the {scale} range [{min}, {max}]")]
    OutOfRange { respondent: String, value: i64, scale: String, min: i64, max: i64 },
    #[error("respondent {respondent} compared items {left} and {right} more than once")]
    DuplicatePair { respondent: String, left: String, right: String },
    #[error("comparison of an item with itself ({item}) by respondent {respondent}")]
    SelfComparison { respondent: String, item: String },
    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: String },
    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange { what: &'static str, index: usize, size: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl SurveyError {
    /// Short stable identifier used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            SurveyError::Io { .. } => "io",
            SurveyError::Malformed { .. } => "malformed",
            SurveyError::DuplicateRating { .. } => "duplicate_rating",
            SurveyError::OutOfRange { .. } => "out_of_range",
            SurveyError::DuplicatePair { .. } => "duplicate_pair",
            SurveyError::SelfComparison { .. } => "self_comparison",
            SurveyError::UnknownId { .. } => "unknown_id",
            SurveyError::IndexOutOfRange { .. } => "index_out_of_range",
            SurveyError::DimensionMismatch(_) => "dimension_mismatch",
            SurveyError::Empty(_) => "empty",
            SurveyError::InvalidArgument(_) => "invalid_argument",
            SurveyError::Numerical(_) => "numerical",
            SurveyError::Serde(_) => "serde",
        }
    }
}
