use std::path::PathBuf;

/// Crate-wide error type.
///
/// Variants are grouped by how the CLI maps them to exit codes: validation
/// problems (bad manifests, bad config, bad arguments) exit with 1, runtime
/// failures (I/O, backend crashes, numerical blowups) exit with 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed wav file {path}: {detail}")]
    WavFormat { path: PathBuf, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("manifest validation failed:\n{report}")]
    ManifestValidation { report: String },

    #[error("backend '{backend}' failed on utterance '{utterance}': {detail}")]
    Backend {
        backend: String,
        utterance: String,
        detail: String,
    },

    #[error("synthesis aborted: {failed} of {total} samples failed (over 1% tolerance); first errors:\n{examples}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        examples: String,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch}; offending utterances: {utterances:?}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        utterances: Vec<String>,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that indicate bad user input rather than a runtime fault.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidInput(_) | Error::ManifestValidation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
