use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] kge_translate_core::Error),

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: kge_translate_core::Error,
    },

    #[error("model file: {0}")]
    ModelFormat(#[from] ModelFormatError),

    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, thiserror::Error)]
pub enum ModelFormatError {
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: String, expected: u32 },

    #[error("not a model file: first line is {0:?}")]
    Magic(String),

    #[error("truncated: {0}")]
    Truncated(String),

    #[error("line {line}: expected {expected} values, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
