use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("part index {part} exceeds 24 at pixel ({x}, {y})")]
    PartIndex { part: u8, x: usize, y: usize },

    #[error("invalid atlas layout: {0}")]
    Layout(String),

    #[error("shoulder not found: no valid atlas cell within {radius} cells of ({x}, {y})")]
    ShoulderNotFound { x: usize, y: usize, radius: usize },

    #[error("degenerate transform: shoulder separation {separation} px")]
    DegenerateTransform { separation: f64 },

    #[error("empty pose database")]
    EmptyDatabase,

    #[error("invalid search parameters: {0}")]
    SearchParams(String),

    #[error("duplicate database id {0:?}")]
    DuplicateId(String),

    #[error("background has no pixels outside the hole mask")]
    AllHole,

    #[error("body mask needs exactly one of pose or matte")]
    MaskSource,

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid config: {0}")]
    ConfigValue(String),

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
