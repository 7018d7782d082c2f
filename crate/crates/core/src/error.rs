use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{name} out of domain: {detail}")]
    Domain { name: &'static str, detail: String },

    #[error("effective arrival rate identity violated: lambda*(1-piK) = {via_loss}, mu*(1-pi0) = {via_idle}")]
    IdentityViolation { via_loss: f64, via_idle: f64 },

    #[error("simulation config: {0}")]
    SimConfig(String),

    #[error("cyclic path specification: {0}")]
    CyclicPath(String),

    #[error("schema version mismatch: file has {found}, this build reads {expected}")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("{file}:{line}: {message}")]
    Malformed {
        file: PathBuf,
        line: u64,
        message: String,
    },

    #[error("integrity: {0}")]
    Integrity(String),

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("unknown feature {0:?}")]
    UnknownFeature(String),

    #[error("feature mismatch: model expects {expected:?}, got {found:?}")]
    FeatureMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("model document: {0}")]
    ModelFormat(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
