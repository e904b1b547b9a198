//! Datasets, the synthetic tree-correlated generator and evaluation metrics.

mod io;
mod metrics;
mod synthetic;

pub use io::{load_dataset, read_matrix, write_dataset, write_matrix, DataError, SPLITS};
pub use metrics::{
    avg_log_likelihood, parzen_score, LikelihoodSummary, MetricError, DEFAULT_PARZEN_SAMPLES,
    DEFAULT_SIGMA,
};
pub use synthetic::{gen_synthetic, gen_synthetic_with, tree_distance, SyntheticConfig};

use crate::matrix::BinaryMatrix;

/// Binary data with train/valid/test splits of equal width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub train: BinaryMatrix,
    pub valid: BinaryMatrix,
    pub test: BinaryMatrix,
}

impl Dataset {
    pub fn vars(&self) -> usize {
        self.train.cols()
    }
}
