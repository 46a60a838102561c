use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("degenerate signal power in lead {0}: AWGN noise level is undefined")]
    DegeneratePower(String),
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: String, reason: String },
    #[error("size error: {0}")]
    Size(String),
    #[error("degenerate transform: {0}")]
    Degenerate(String),
    #[error("point {index} maps to infinity (w' = {w})")]
    PointAtInfinity { index: usize, w: f64 },
    #[error("lead {0}: no trace pixels in region")]
    EmptyTrace(String),
    #[error("reference signal is all zeros; SNR undefined")]
    ZeroReference,
    #[error("empty report: {0}")]
    EmptyReport(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
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
    #[error("image codec: {0}")]
    Codec(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
