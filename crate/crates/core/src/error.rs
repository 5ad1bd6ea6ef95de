use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset not found: {}", .0.display())]
    DatasetNotFound(PathBuf),

    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("rating {0} outside 0..=5")]
    RatingOutOfRange(i64),

    #[error("unknown label {label:?} at row {row}, column {column}")]
    UnknownLabel { row: usize, column: String, label: String },

    #[error("duplicate user id {0:?}")]
    DuplicateUser(String),

    #[error("duplicate item id {0:?}")]
    DuplicateItem(String),

    #[error("unknown item {0:?}")]
    UnknownItem(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("grid has {cells} cells but {rows} users x {cols} items were declared")]
    ShapeMismatch { rows: usize, cols: usize, cells: usize },

    #[error("no items left after filtering at max missing fraction {0}")]
    NothingToRecommend(f64),

    #[error("matrix has no present ratings")]
    NoRatings,

    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("no rankable neighbor candidates for entity {0}")]
    NoRankableCandidates(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("grid cell {cell} failed: {source}")]
    GridCell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
