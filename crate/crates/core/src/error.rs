use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("row {row}: degenerate bounds for '{name}': lower {lower} >= upper {upper}")]
    DegenerateBounds {
        row: usize,
        name: String,
        lower: f64,
        upper: f64,
    },

    #[error("row {row}: duplicate parameter name '{name}'")]
    DuplicateName { row: usize, name: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index set of {requested} terms exceeds the cap of {cap} terms")]
    IndexSetTooLarge { requested: u128, cap: usize },

    #[error("insufficient samples: {required} finite samples required for {terms} basis terms, got {got}")]
    InsufficientSamples {
        required: usize,
        terms: usize,
        got: usize,
    },

    #[error("rank-deficient design matrix ({rows} x {cols}); at least {cols} well-spread samples are required")]
    RankDeficient { rows: usize, cols: usize },

    #[error("all {0} model outputs are non-finite")]
    AllOutputsNonFinite(usize),

    #[error("surrogate has zero variance (constant expansion)")]
    ZeroVariance,

    #[error("coordinate {t} outside station range [{lo}, {hi}]")]
    Extrapolation { t: f64, lo: f64, hi: f64 },

    #[error("no surrogate station matches coordinate {0:?}")]
    StationNotFound(Vec<f64>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("chain of {steps} x {dim} entries exceeds the cap of {cap}")]
    ChainTooLarge { steps: usize, dim: usize, cap: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::RankDeficient { .. }
            | Error::AllOutputsNonFinite(_)
            | Error::ZeroVariance
            | Error::Numerical(_) => ErrorKind::Numerical,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
