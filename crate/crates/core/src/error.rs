use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed record in a line-delimited file. `line` is 1-based.
    #[error("line {line}: field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A sequence that cannot be turned into model input.
    #[error("walk {walk_id}: {reason}")]
    Preprocess { walk_id: String, reason: String },

    #[error("joint `{joint}` has {valid} valid frames, need at least 2")]
    InsufficientDetections { joint: String, valid: usize },

    #[error("sequence has {len} frames, need at least {needed}")]
    SequenceTooShort { len: usize, needed: usize },

    #[error("degenerate hip width at frame {frame}")]
    DegenerateHipWidth { frame: usize },

    #[error("no stance detected")]
    NoStanceDetected,

    #[error("heel strikes do not alternate between feet")]
    NonAlternating,

    #[error("found {found} heel strikes, need at least {needed}")]
    TooFewSteps { found: usize, needed: usize },

    #[error("subject `{subject_id}` appears in both training and validation data")]
    SubjectLeakage { subject_id: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
