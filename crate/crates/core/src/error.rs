use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("curves live on different grids")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("sample is empty")]
    EmptySample,
    #[error("need at least {needed} curves, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    AsymmetricMatrix(f64),
    #[error("eigenvalue {0:e} is negative beyond rounding tolerance")]
    NegativeEigenvalue(f64),
    #[error("all eigenvalues are zero")]
    DegenerateSpectrum,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no sample curve has positive kernel weight at this point (bandwidth too small)")]
    EmptyNeighborhood,
    #[error("difference curve has zero norm")]
    ZeroDifference,
    #[error("component {component}: no pair of curves has positive weight (bandwidths too small)")]
    EmptyPairNeighborhood { component: usize },
    #[error("direction is not unit-norm (sum of squares {0})")]
    InvalidDirection(f64),
    #[error("component {0} has no estimate")]
    MissingComponent(usize),
    #[error("gradient vector is zero")]
    ZeroGradient,
    #[error("need at least 3 time points, got {0}")]
    InsufficientTimepoints(usize),
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyNeighborhood
            | Error::EmptyPairNeighborhood { .. }
            | Error::ZeroGradient
            | Error::DegenerateSpectrum
            | Error::NegativeEigenvalue(_)
            | Error::AsymmetricMatrix(_) => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }
}
