use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PitaError> = std::result::Result<T, E>;

/// Broad failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum PitaError {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite entry in `{field}`")]
    NonFiniteEntry { field: &'static str },

    #[error("non-finite state after step {step} (t = {time})")]
    NonFiniteResult { step: usize, time: f64 },

    #[error("interval length {span} is not an integral multiple of step {step} (ratio {ratio})")]
    NonIntegralSteps { span: f64, step: f64, ratio: f64 },

    #[error("matrix (I - hA) is singular for h = {h} (|det| = {det:e})")]
    SingularMatrix { h: f64, det: f64 },

    #[error("degenerate Shanks denominator {denominator:e}")]
    DegenerateDenominator { denominator: f64 },

    #[error("insufficient terms: {required} required, {available} available")]
    InsufficientTerms { required: usize, available: usize },

    #[error("slice {slice}: insufficient terms, {required} required, {available} available")]
    UnderfilledSlice {
        slice: usize,
        required: usize,
        available: usize,
    },

    #[error("odd extrapolation order k = {k}; only even orders are supported")]
    OddOrder { k: usize },

    #[error("delta distance {distance} outside the open interval ({lower}, {upper})")]
    ScheduleViolation {
        distance: f64,
        lower: f64,
        upper: f64,
    },

    #[error("explicit Euler unstable at h = {h}: spectral radius {radius} >= 1")]
    Unstable { h: f64, radius: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("iteration {iteration}, slice {slice}: {source}")]
    Propagation {
        iteration: usize,
        slice: usize,
        #[source]
        source: Box<PitaError>,
    },
}

impl PitaError {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        PitaError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PitaError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            PitaError::DimensionMismatch { .. }
            | PitaError::NonFiniteEntry { .. }
            | PitaError::NonIntegralSteps { .. }
            | PitaError::InsufficientTerms { .. }
            | PitaError::UnderfilledSlice { .. }
            | PitaError::OddOrder { .. }
            | PitaError::ScheduleViolation { .. }
            | PitaError::InvalidArgument(_)
            | PitaError::Config { .. } => ErrorClass::Config,
            PitaError::NonFiniteResult { .. }
            | PitaError::SingularMatrix { .. }
            | PitaError::DegenerateDenominator { .. }
            | PitaError::Unstable { .. } => ErrorClass::Numerical,
            PitaError::Io { .. } => ErrorClass::Io,
            PitaError::Propagation { source, .. } => source.class(),
        }
    }
}
