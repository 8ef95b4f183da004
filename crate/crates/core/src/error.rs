use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed wav {path}: {reason}")]
    MalformedWav { path: PathBuf, reason: String },

    #[error("unsupported wav format in {path}: {field} = {value}")]
    UnsupportedWav {
        path: PathBuf,
        field: &'static str,
        value: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("spectral convergence undefined: target spectrogram has zero norm")]
    ZeroTarget,

    #[error("format error: {0}")]
    Format(String),

    #[error("pitch track is empty; mean f0 undefined")]
    EmptyPitchTrack,

    #[error("data directory validation failed: {0}")]
    Validation(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
