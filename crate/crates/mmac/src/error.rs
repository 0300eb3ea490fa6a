use std::path::PathBuf;

use mmac_core::backend::ConfigError;
use mmac_core::simenv::FixtureError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("fixture `{0}` not found")]
    FixtureMissing(String),
    #[error("fixture `{fixture}` has no goal named `{goal}`")]
    GoalMissing { fixture: String, goal: String },
    #[error("no script for role backends: {0}")]
    NoScript(String),
    #[error("environment variable {0} is not set")]
    MissingCredential(String),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
