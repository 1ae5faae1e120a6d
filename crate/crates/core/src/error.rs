use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while ingesting, validating or selecting rating data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed row: {message}")]
    Malformed { line: u64, message: String },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: score out of range: {score} not in 0..={k_max}")]
    ScoreOutOfRange { line: u64, score: i64, k_max: u8 },
    #[error("line {line}: duplicate (item, rater) pair ({item_id}, {rater_id})")]
    DuplicateKey {
        line: u64,
        item_id: String,
        rater_id: String,
    },
    #[error("line {line}: non-binary label `{value}`")]
    NonBinaryLabel { line: u64, value: String },
    #[error("invalid scale: k_max must be between 1 and 255, got {0}")]
    InvalidScale(i64),
    #[error("empty axis name")]
    EmptyAxis,
    #[error("axis `{0}` appears more than once")]
    DuplicateAxis(String),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("invalid group key `{0}`: expected axis=value pairs separated by commas")]
    InvalidGroupKey(String),
    #[error("empty rater set")]
    EmptyRaterSet,
    #[error("write failed: {0}")]
    Write(String),
}

impl DataError {
    /// Line number of the offending row, when the error came from a file.
    pub fn line(&self) -> Option<u64> {
        match self {
            DataError::Malformed { line, .. }
            | DataError::ScoreOutOfRange { line, .. }
            | DataError::DuplicateKey { line, .. }
            | DataError::NonBinaryLabel { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Errors raised by reference construction, metric evaluation and resampling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("empty pair set")]
    EmptyPairSet,
    #[error("no shared items between group scores and reference labels")]
    NoSharedItems,
    #[error("empty reference population: every rater is being evaluated")]
    EmptyReferencePopulation,
    #[error("empty list of pair sets")]
    NoPairSets,
    #[error("pair sets disagree on scale or reference kind")]
    InconsistentPairSets,
    #[error("score {score} outside scale 0..={k_max}")]
    ScoreOutsideScale { score: u8, k_max: u8 },
    #[error("metric undefined on {undefined} of {trials} resamples")]
    TooManyUndefined { undefined: usize, trials: usize },
    #[error("metric undefined on the full data")]
    UndefinedPoint,
    #[error("groups must be disjoint; `{0}` is in both")]
    OverlappingGroups(String),
    #[error("insufficient raters to permute: {0}")]
    InsufficientRaters(String),
    #[error("invalid resampling configuration: {0}")]
    InvalidConfig(String),
    #[error("empty rater set")]
    EmptyRaterSet,
    #[error("cannot average an empty list")]
    EmptyAverage,
}
