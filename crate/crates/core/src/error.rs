use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated payload: header declares {expected} values, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("data error: {0}")]
    Data(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("segmentation error: {0}")]
    Segmentation(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("insufficient points: {points} points for {clusters} clusters")]
    InsufficientPoints { points: usize, clusters: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("utterance {utt_id}: {source}")]
    Utterance {
        utt_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_utterance(self, utt_id: &str) -> Self {
        Error::Utterance {
            utt_id: utt_id.to_string(),
            source: Box::new(self),
        }
    }
}
