use thiserror::Error;

/// Errors raised by the estimator, its data model and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("point {point:?} lies outside the domain of the {kernel} kernel")]
    Domain {
        kernel: &'static str,
        point: Vec<f64>,
    },

    #[error("curves are not sampled on a common grid")]
    GridMismatch,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("every (lambda, xi) pair on the grid failed to produce a finite score")]
    AllPairsFailed,

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}, row {row}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Schema {
        path: String,
        /// 1-based line number in the file.
        row: usize,
        /// 1-based field index, when the problem is confined to one field.
        column: Option<usize>,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical kind, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::NonFinite(_) | Error::AllPairsFailed
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
