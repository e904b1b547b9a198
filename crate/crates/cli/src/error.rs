use crate::model_file::ModelFileError;
use hyperspn::circuit::{EvalError, StructureError};
use hyperspn::data::{DataError, MetricError};
use hyperspn::training::TrainError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Model {
        path: PathBuf,
        source: ModelFileError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    /// 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Structure(_) => 1,
            CliError::Train(TrainError::Hyper(_)) => 1,
            CliError::Train(TrainError::NonFinite { .. }) | CliError::Numeric(_) => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
