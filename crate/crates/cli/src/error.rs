use mchjm_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    Data { path: String, line: u64, msg: String },
    #[error("data error: {0}")]
    Dataset(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 config, 3 data, 4 insufficient data, 5 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io { .. } => 2,
            Self::Data { .. } | Self::Dataset(_) => 3,
            Self::Insufficient(_) => 4,
            Self::Numerical(_) => 5,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InsufficientData(m) => Self::Insufficient(m),
            CoreError::Numerical(m) | CoreError::NoRealization(m) => Self::Numerical(m),
            CoreError::Input(m) | CoreError::Domain(m) | CoreError::Dimension(m) => Self::Config(m),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
