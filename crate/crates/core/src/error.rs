use thiserror::Error;

/// Fatal errors raised by the pipeline. Individual malformed input records are
/// not errors; they are collected as [`crate::ingest::Rejection`]s.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("no events for person {0}")]
    NoEvents(String),

    #[error("inconsistent params across profiles")]
    InconsistentParams,

    #[error("invalid synth config: field `{field}`: {reason}")]
    SynthConfig { field: &'static str, reason: String },

    #[error("oracle refuses instance: {0}")]
    OracleTooLarge(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
