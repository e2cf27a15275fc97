use std::path::PathBuf;

use crate::model::Arm;

/// Errors raised by the library.
///
/// Validation failures (bad inputs, violated invariants) are distinguished
/// from I/O failures so front ends can map them to different exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unit {unit_id}: entry time {entry} must precede event time {event} under arm {arm}")]
    EventBeforeEntry {
        unit_id: usize,
        arm: Arm,
        entry: f64,
        event: f64,
    },

    #[error("unit {unit_id}: |outcome| = {value} exceeds bound B = {bound}")]
    OutcomeOutOfBounds { unit_id: usize, value: f64, bound: f64 },

    #[error("unit {unit_id}: propensity {propensity} outside [{min}, {max}]")]
    PropensityOutOfBounds {
        unit_id: usize,
        propensity: f64,
        min: f64,
        max: f64,
    },

    #[error("unit {unit_id}: non-finite value in field `{field}`")]
    NonFinite { unit_id: usize, field: &'static str },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid arm label {0}; expected 0 or 1")]
    InvalidArm(i64),

    #[error("duplicate unit id {0}")]
    DuplicateUnit(usize),

    #[error(
        "augmentation for unit {unit_id}, arm {arm} is nonzero before the event time \
         ({value} at t = {time}); the error process would not be adapted"
    )]
    AugmentationBeforeEvent {
        unit_id: usize,
        arm: Arm,
        time: f64,
        value: f64,
    },

    #[error(
        "augmentation for unit {unit_id}, arm {arm} changes value at t = {time} after the \
         event time; the increment would be predictable"
    )]
    AugmentationDrift { unit_id: usize, arm: Arm, time: f64 },

    #[error("augmentation policy requires the potential-outcome table")]
    OracleRequired,

    #[error("{0}")]
    Domain(String),

    #[error("thinning majorant violated: hazard {hazard} > bound {bound} at internal time {s}")]
    MajorantViolated { s: f64, hazard: f64, bound: f64 },

    #[error("no event before the internal-time cap {cap}")]
    ThinningCapExceeded { cap: f64 },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}: {message}")]
    BadRow { path: PathBuf, row: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the environment rather than of the inputs.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
