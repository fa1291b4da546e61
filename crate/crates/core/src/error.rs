use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown language code(s): {}", .0.join(", "))]
    UnknownLanguage(Vec<String>),

    #[error("invalid language code {0:?}")]
    InvalidLanguage(String),

    #[error("{path}:{line}: {kind} {id} is not in the lexicon")]
    MissingLexiconEntry {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        id: String,
    },

    #[error("unknown entity {0}")]
    UnknownEntity(String),

    #[error("snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("wrong sample kind: expected {expected}, got {got}")]
    WrongKind {
        expected: &'static str,
        got: &'static str,
    },

    #[error("malformed spans in record {0}")]
    MalformedSpans(String),

    #[error("item pool too small: requested {requested_train} train / {requested_dev} dev, achievable {achieved_train} / {achieved_dev}")]
    PoolTooSmall {
        requested_train: usize,
        requested_dev: usize,
        achieved_train: usize,
        achieved_dev: usize,
    },

    #[error("missing input stream {0}")]
    MissingStream(PathBuf),

    #[error("{path}:{line}: unknown schema {schema:?}")]
    UnknownSchema {
        path: PathBuf,
        line: usize,
        schema: String,
    },

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (files, config, flags) rather
    /// than by a failure inside the pipeline.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_input_error(),
            Error::Io { source, .. } => matches!(
                source.kind(),
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied | std::io::ErrorKind::InvalidData
            ),
            Error::Json(_) => false,
            _ => true,
        }
    }
}
