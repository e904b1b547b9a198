use crate::circuit::{log_density_rows, CircuitStructure, EvalError, WeightStore};
use crate::math::log_sum_exp;
use crate::matrix::BinaryMatrix;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodSummary {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(rows)`; zero for a single row.
    pub stderr: f64,
    pub rows: usize,
}

impl LikelihoodSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let rows = values.len();
        let mean = values.iter().sum::<f64>() / rows as f64;
        let stderr = if rows < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (rows - 1) as f64;
            var.sqrt() / (rows as f64).sqrt()
        };
        Self { mean, stderr, rows }
    }
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("input matrix is empty")]
    Empty,
    #[error("column counts differ: {0} vs {1}")]
    Columns(usize, usize),
    #[error("kernel bandwidth must be positive, got {0}")]
    Bandwidth(f64),
}

pub fn avg_log_likelihood(
    structure: &CircuitStructure,
    weights: &WeightStore,
    split: &BinaryMatrix,
) -> Result<LikelihoodSummary, MetricError> {
    if split.is_empty() {
        return Err(MetricError::Empty);
    }
    let values = log_density_rows(structure, weights, split)?;
    Ok(LikelihoodSummary::from_values(&values))
}

pub const DEFAULT_SIGMA: f64 = 0.2;
pub const DEFAULT_PARZEN_SAMPLES: usize = 500;

/// Mean log-density of `samples` under an isotropic Gaussian KDE with
/// variance `sigma²` centred on each row of `test`, rows read as real vectors.
pub fn parzen_score(
    test: &BinaryMatrix,
    samples: &BinaryMatrix,
    sigma: f64,
) -> Result<f64, MetricError> {
    if test.is_empty() || samples.is_empty() {
        return Err(MetricError::Empty);
    }
    if test.cols() != samples.cols() {
        return Err(MetricError::Columns(test.cols(), samples.cols()));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(MetricError::Bandwidth(sigma));
    }
    let d = test.cols() as f64;
    let log_norm = -0.5 * d * (2.0 * PI * sigma * sigma).ln();
    let log_count = (test.rows() as f64).ln();
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let mut exps = vec![0.0; test.rows()];
    let mut total = 0.0;
    for s in samples.iter_rows() {
        for (e, t) in exps.iter_mut().zip(test.iter_rows()) {
            // Squared distance between 0/1 vectors is the Hamming distance.
            let dist = s.iter().zip(t).filter(|(a, b)| a != b).count() as f64;
            *e = -dist * inv_two_var;
        }
        total += log_sum_exp(&exps) - log_count + log_norm;
    }
    Ok(total / samples.rows() as f64)
}
