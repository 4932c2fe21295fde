//! Experiment pipeline around `semnav-core`: run configuration, on-disk
//! formats, PNG renders and the stages behind the `semnav` command line.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod render;

use std::path::PathBuf;

use semnav_core::harness::HarnessError;
use semnav_core::predictor::PredictorError;
use semnav_core::world::WorldError;

pub use config::RunConfig;
pub use pipeline::Run;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("missing input {0}; run the earlier stage first")]
    MissingInput(PathBuf),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    /// Process exit code: 1 for configuration problems, 2 for everything
    /// that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
