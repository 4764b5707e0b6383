use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the extraction and modelling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("image too small: need at least {min}x{min}, got {width}x{height}")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("region of interest is empty")]
    EmptyRoi,
    #[error("polygon lies entirely outside the image")]
    OutOfBounds,
    #[error("mask has {0} 8-connected components, expected 1")]
    MultipleComponents(usize),
    #[error("degenerate intensity range [{lo}, {hi}]")]
    DegenerateRange { lo: f64, hi: f64 },
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("region too small: {0}")]
    RoiTooSmall(String),
    #[error("no in-mask pixel pairs for offset ({dx}, {dy})")]
    NoPairs { dx: i32, dy: i32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("only one class present in the labels")]
    SingleClass,
    #[error("class {class} has {count} members, fewer than the {k} folds")]
    ClassTooSmall { class: u8, count: usize, k: usize },
    #[error("response has no signal: lambda_max is zero")]
    ZeroSignal,
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("patient {0} is missing a sequence")]
    MissingSequence(String),
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("malformed input {path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
