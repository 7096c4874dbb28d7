use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::llm::RunError;

/// Top-level failure, grouped by the exit code the command line reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Run(#[from] RunError),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// 2 for configuration problems, 3 for bad or missing data, 4 when a
    /// query run aborts.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Data(_) => 3,
            Error::Run(RunError::Config(_)) => 2,
            Error::Run(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }
}
