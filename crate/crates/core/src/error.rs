use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format in {}: {detail}", path.display())]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("image codec error: {0}")]
    Codec(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("target {target_w}x{target_h} is smaller than source {width}x{height}")]
    DimensionTooSmall {
        width: usize,
        height: usize,
        target_w: usize,
        target_h: usize,
    },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("unknown preset: {0}")]
    UnknownPreset(String),

    #[error("invalid augmentation config: {0}")]
    Config(String),

    #[error("line is {width} px wide after height normalisation, limit is {limit}")]
    TooWide { width: usize, limit: usize },

    #[error("symbol {symbol:?} at position {position} is not in the alphabet")]
    UnknownSymbol { symbol: char, position: usize },

    #[error("target has {len} symbols, limit is {limit}")]
    TargetTooLong { len: usize, limit: usize },

    #[error("invalid alphabet: {0}")]
    Alphabet(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("logit matrix has {classes} classes, alphabet needs {expected}")]
    ClassMismatch { classes: usize, expected: usize },

    #[error("invalid logit matrix: {0}")]
    InvalidLogits(String),

    #[error("error rate undefined for an empty reference with a non-empty hypothesis")]
    UndefinedRate,

    #[error("no results for config {0:?}")]
    EmptySelection(String),

    #[error("all paired differences are zero")]
    DegenerateSample,

    #[error("invalid paired sample: {0}")]
    InvalidSample(String),

    #[error("pairing keys do not match; unmatched: {}", .0.join(", "))]
    PairingMismatch(Vec<String>),

    #[error("baseline config {0:?} is missing")]
    MissingBaseline(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
