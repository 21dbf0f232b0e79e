use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the inference pipeline.
///
/// Variants fall into three categories (validation, numerical, I/O) which the
/// command line maps onto distinct exit codes; see [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient draws: need at least {needed}, got {got}")]
    InsufficientDraws { needed: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is singular (min eigenvalue {min_eigenvalue:e}){}", context_suffix(.context))]
    Singular {
        min_eigenvalue: f64,
        context: Option<String>,
    },

    #[error("eigen-solver failed to converge on a {dim}x{dim} matrix")]
    EigenNonConvergence { dim: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sampler failed on subset(s) {}: {message}", join_indices(.subsets))]
    SubsetFailures {
        subsets: Vec<usize>,
        message: String,
    },

    #[error("parse error in {path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("header mismatch in {path}: expected [{expected}], found [{found}]")]
    HeaderMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn context_suffix(context: &Option<String>) -> String {
    context
        .as_ref()
        .map(|c| format!(" in {c}"))
        .unwrap_or_default()
}

fn join_indices(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|j| j.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Numerical,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Validation => 1,
            ErrorCategory::Numerical => 2,
            ErrorCategory::Io => 3,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::DimensionMismatch(_)
            | Error::InvalidArgument(_)
            | Error::InsufficientDraws { .. }
            | Error::InsufficientData(_)
            | Error::Parse { .. }
            | Error::HeaderMismatch { .. }
            | Error::Config(_) => ErrorCategory::Validation,
            Error::NotPsd { .. }
            | Error::Singular { .. }
            | Error::EigenNonConvergence { .. }
            | Error::Numerical(_)
            | Error::SubsetFailures { .. } => ErrorCategory::Numerical,
            Error::Io { .. } | Error::Csv { .. } => ErrorCategory::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
