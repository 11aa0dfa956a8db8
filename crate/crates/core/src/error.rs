use std::path::PathBuf;

/// Errors raised by the simulation engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty series")]
    EmptySeries,
    #[error("sample {value} out of range [-127, 128] at index {index}")]
    SampleOutOfRange { index: usize, value: i64 },
    #[error("degenerate series: zero variance")]
    DegenerateSeries,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite state {0:?}")]
    NonFiniteState([f64; 4]),
    #[error("degenerate simplex: {0}")]
    DegenerateSimplex(String),
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: cannot parse `{text}` as an integer sample")]
    Parse { line: usize, text: String },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user configuration rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Read { .. }
                | Error::Parse { .. }
                | Error::InvalidArgument(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
