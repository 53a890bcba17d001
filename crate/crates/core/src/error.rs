use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown {kind} `{name}` (valid: {})", valid.join(", "))]
    NotFound {
        kind: &'static str,
        name: String,
        valid: Vec<String>,
    },

    #[error("decision vector {point:?} is outside the box of problem `{problem}`")]
    OutOfBounds { problem: String, point: Vec<f64> },

    #[error("decision vector has dimension {got}, problem `{problem}` expects {expected}")]
    DimensionMismatch {
        problem: String,
        expected: usize,
        got: usize,
    },

    #[error("all importance weights are zero at step {step}")]
    DegenerateWeights { step: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
