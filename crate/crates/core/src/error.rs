use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration document failed validation. `path` locates the field.
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown model id `{0}`")]
    UnknownModel(String),

    #[error("unknown prefix `{0}`")]
    UnknownPrefix(String),

    #[error("path is infeasible at position {position}: {reason}")]
    InfeasiblePath { position: usize, reason: String },

    #[error("trie and world were built from different templates or catalogs")]
    Mismatch,

    #[error("annotation file version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("{what} hash mismatch: file has {found}, expected {expected}")]
    HashMismatch {
        what: &'static str,
        found: String,
        expected: String,
    },

    #[error("malformed value for `{field}`: {message}")]
    Malformed { field: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("request context already terminated ({0:?})")]
    AlreadyTerminated(crate::controller::Status),

    #[error("objective `{input}` does not parse: {message}; expected e.g. `min_cost:acc>=0.90`, `max_acc:cost<=11`, `max_acc:lat<=4.9` or `max_acc:cost<=11,lat<=4.9`")]
    Objective { input: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
