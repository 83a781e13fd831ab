use std::path::PathBuf;

/// Every failure the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: unsupported label {label}")]
    UnsupportedLabel { line: usize, label: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} index {index} out of range (< {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("iterate diverged at {context}")]
    Divergence { context: String },

    #[error("optimum solver hit the iteration cap {iterations} with gradient norm {grad_norm:e}")]
    NotConverged { iterations: u64, grad_norm: f64 },

    #[error("enumeration of {outcomes} outcomes exceeds the guard of {limit}")]
    EnumerationTooLarge { outcomes: u128, limit: u128 },

    #[error("configuration: {0}")]
    Config(String),

    #[error("every run diverged for {0}")]
    AllDiverged(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("optimum sidecar: {0}")]
    Sidecar(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI, grouped by failure category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) => 2,
            Error::Parse { .. } | Error::UnsupportedLabel { .. } => 3,
            Error::Divergence { .. } | Error::AllDiverged(_) => 4,
            Error::NotConverged { .. } => 5,
            Error::Io { .. } | Error::Sidecar(_) => 6,
            Error::IndexOutOfRange { .. } | Error::EnumerationTooLarge { .. } => 7,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
