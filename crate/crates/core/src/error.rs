use std::path::PathBuf;

use thiserror::Error;

use crate::io::config::ConfigError;
use crate::io::dump::DumpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("class {class} has {count} example(s); at least {needed} required")]
    ClassTooSmall {
        class: usize,
        count: usize,
        needed: usize,
    },

    #[error("zero-length vector: {0}")]
    ZeroVector(&'static str),

    #[error("gradient is identically zero (all predictions frozen at their labels)")]
    ZeroGradient,

    #[error("trace ratio undefined: spectral norm is zero")]
    UndefinedRatio,

    #[error("eigensolver did not converge for eigenvalue {index} after {iterations} iterations")]
    NoConvergence { index: usize, iterations: usize },

    #[error("matrix is not symmetric: max |H - H^T| = {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("dense assembly needs {needed} bytes, budget is {budget} bytes")]
    MemoryBudget { needed: u64, budget: u64 },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Dump(#[from] DumpError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end: 2 for
    /// filesystem failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Dump(DumpError::Io { .. }) => 2,
            _ => 1,
        }
    }
}
