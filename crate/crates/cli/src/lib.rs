//! Training, evaluation and comparison commands for `hyperspn`.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod model_file;

pub use error::CliError;
pub use experiment::{ComparePresets, ExperimentSpec, Setting, Summary, Variant};
pub use model_file::ModelFile;
