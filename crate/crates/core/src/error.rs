use thiserror::Error;

/// Errors produced by the library. The CLI maps every variant to exit code 2
/// except where noted in `cli`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("norm specification error: {0}")]
    NormSpec(String),

    #[error("dictionary exhausted: {0}")]
    DictionaryExhausted(String),

    #[error("no representation within tolerance using {terms} terms (residual {residual:.3e}); increase k")]
    IncreaseTerms { terms: usize, residual: f64 },

    #[error("linear program: {0}")]
    Lp(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path} at line {line}, column {column}: {message}")]
    Json {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
