use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus: {0}")]
    Corpus(String),

    #[error("template: {0}")]
    Template(String),

    #[error("lexicon: {0}")]
    Lexicon(String),

    #[error("config: {0}")]
    Config(String),

    #[error("gateway: {0}")]
    Gateway(String),

    #[error("partial run: {completed} of {expected} conditions completed; first gaps: {gaps:?}")]
    PartialRun {
        completed: usize,
        expected: usize,
        /// A bounded sample of missing condition keys, for diagnostics.
        gaps: Vec<String>,
    },

    #[error("stats: {0}")]
    Stats(String),

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("align: {0}")]
    Align(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 partial run, 4 analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Template(_) | Error::Lexicon(_) => 2,
            Error::PartialRun { .. } => 3,
            Error::Stats(_) | Error::Analysis(_) => 4,
            _ => 1,
        }
    }
}
