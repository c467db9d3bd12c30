use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("cannot choose {k} items from {n}")]
    SampleSize { k: usize, n: usize },

    #[error("sample id {id} out of range for dataset of {n}")]
    IdOutOfRange { id: usize, n: usize },

    #[error(
        "lambda {lambda} makes the candidate pool ({pool:.1}) exceed the dataset size {n}"
    )]
    InvalidLambda { lambda: f64, pool: f64, n: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable short identifier, used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidWeights(_) => "invalid_weights",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::SampleSize { .. } => "sample_size",
            Error::IdOutOfRange { .. } => "id_out_of_range",
            Error::InvalidLambda { .. } => "invalid_lambda",
            Error::Empty(_) => "empty",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Shape(_) => "shape",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
