use super::structure::{CircuitStructure, Sector};
use crate::math::{log_softmax_in_place, softmax_in_place};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("expected {expected} weights, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("sector {sector} row {row}: {reason}")]
    Row {
        sector: usize,
        row: usize,
        reason: String,
    },
}

/// Normalized mixture weights for every sector, stored flat in sector order,
/// with a cached element-wise log.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

impl WeightStore {
    /// Wraps already-normalized weights after checking every row.
    pub fn from_weights(
        structure: &CircuitStructure,
        weights: Vec<f64>,
    ) -> Result<Self, WeightError> {
        check_len(structure, weights.len())?;
        for (id, sector) in structure.sectors().iter().enumerate() {
            for row in 0..sector.rows {
                let values = &weights[row_range(sector, row)];
                if values.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(WeightError::Row {
                        sector: id,
                        row,
                        reason: "negative or non-finite weight".into(),
                    });
                }
                let sum: f64 = values.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(WeightError::Row {
                        sector: id,
                        row,
                        reason: format!("row sums to {sum}"),
                    });
                }
            }
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            weights,
            log_weights,
        })
    }

    /// Row-wise exponential normalization of unconstrained logits laid out like the weights.
    pub fn from_logits(structure: &CircuitStructure, logits: &[f64]) -> Result<Self, WeightError> {
        check_len(structure, logits.len())?;
        let mut weights = logits.to_vec();
        let mut log_weights = logits.to_vec();
        for sector in structure.sectors() {
            for row in 0..sector.rows {
                let range = row_range(sector, row);
                softmax_in_place(&mut weights[range.clone()]);
                log_softmax_in_place(&mut log_weights[range]);
            }
        }
        Ok(Self {
            weights,
            log_weights,
        })
    }

    /// Every row uniform.
    pub fn uniform(structure: &CircuitStructure) -> Self {
        Self::from_logits(structure, &vec![0.0; structure.param_count()]).expect("length matches")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sector(&self, sector: &Sector) -> &[f64] {
        &self.weights[sector.range()]
    }

    pub fn sector_log(&self, sector: &Sector) -> &[f64] {
        &self.log_weights[sector.range()]
    }
}

fn check_len(structure: &CircuitStructure, actual: usize) -> Result<(), WeightError> {
    let expected = structure.param_count();
    if expected != actual {
        return Err(WeightError::Length { expected, actual });
    }
    Ok(())
}

fn row_range(sector: &Sector, row: usize) -> std::ops::Range<usize> {
    let start = sector.offset + row * sector.cols;
    start..start + sector.cols
}
