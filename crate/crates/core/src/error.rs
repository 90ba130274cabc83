use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("timestamps not strictly increasing at row {row}")]
    NonMonotonicTime { row: usize },
    #[error("non-uniform sampling at row {row}: step {step} vs {expected}")]
    NonUniformSampling { row: usize, step: f64, expected: f64 },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("invalid value `{value}` at row {row}, column `{column}`")]
    InvalidValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("empty channel set")]
    EmptyChannelSet,
    #[error("too many channels: {0} (max 16)")]
    TooManyChannels(usize),
    #[error("series too short: {len} ticks, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("too few samples: {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("word sequence too short: {0}")]
    SequenceTooShort(usize),
    #[error("unknown word id {0}")]
    UnknownWord(usize),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("Bhattacharyya coefficient {0} out of range")]
    CoefficientOutOfRange(f64),
    #[error("update called before predict")]
    PredictRequired,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("labels contain a single class")]
    SingleClassLabels,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no reports to select from")]
    EmptyReportSet,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported model format version {0}")]
    UnsupportedFormat(u32),
    #[error("unknown ground-truth class `{0}`")]
    UnknownClass(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
