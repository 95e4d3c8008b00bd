use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point {point:?} lies outside the domain [{lower}, {upper}]")]
    OutsideDomain {
        point: Vec<f64>,
        lower: f64,
        upper: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value produced: {0}")]
    NonFinite(String),

    #[error("invalid sample set: {0}")]
    InvalidSample(String),

    #[error("degenerate sample: every pair has a zero denominator")]
    DegenerateSample,

    #[error("empty k grid")]
    EmptyGrid,

    #[error("iterate {iteration} escaped the domain: {source}")]
    DomainEscape {
        iteration: usize,
        point: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("lambda = auto requires a feasible enriched certificate; pass an explicit lambda")]
    AutoLambdaUnresolved,

    #[error("gamma = {gamma} is outside (0, 2/rho) with rho = {rho}")]
    GammaOutOfRange { gamma: f64, rho: f64 },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
