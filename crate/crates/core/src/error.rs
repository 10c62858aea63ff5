use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("query {query_id}: gold passage {passage_id} does not resolve to a corpus passage")]
    UnresolvedGold { query_id: String, passage_id: String },

    #[error("unknown query id {0}")]
    UnknownQuery(String),

    #[error("unknown passage id {0}")]
    UnknownPassage(String),

    #[error("query {query_id}: distractor pool too small (need {needed}, have {available})")]
    PoolExhausted {
        query_id: String,
        needed: usize,
        available: usize,
    },

    #[error("{role} endpoint failed after {attempts} attempt(s): {message}")]
    Endpoint {
        role: String,
        attempts: u32,
        message: String,
    },

    #[error("classifier returned out-of-range label {0:?}")]
    BadLabel(String),

    #[error("no bracketed id list in model response: {raw:?}")]
    RerankParse { raw: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
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
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the harness stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Short machine-readable kind tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::MalformedRecord { .. } => "malformed-record",
            Error::UnresolvedGold { .. } => "unresolved-gold",
            Error::UnknownQuery(_) => "unknown-query",
            Error::UnknownPassage(_) => "unknown-passage",
            Error::PoolExhausted { .. } => "pool-exhausted",
            Error::Endpoint { .. } => "endpoint",
            Error::BadLabel(_) => "bad-label",
            Error::RerankParse { .. } => "parse-error",
            Error::Config(_) => "config",
            Error::Stage { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
