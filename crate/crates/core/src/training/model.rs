use crate::circuit::{
    log_density_rows, log_weight_gradient, CircuitStructure, EvalError, WeightStore,
};
use crate::hypernet::{init_hyper, materialize_all, DecoderConfig, HyperError, HyperParams};
use crate::matrix::BinaryMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("non-finite loss {loss} at step {step}")]
    NonFinite { loss: f64, step: u64 },
    #[error("trainable vector has length {actual}, model needs {expected}")]
    Length { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    /// Unconstrained per-sector logits, laid out like the weight store.
    Plain(Vec<f64>),
    Hyper(HyperParams),
}

/// A circuit structure together with the parameters that are trained.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainableModel {
    structure: CircuitStructure,
    params: Params,
}

impl TrainableModel {
    pub fn new(structure: CircuitStructure, params: Params) -> Result<Self, TrainError> {
        let model = Self { structure, params };
        if let Params::Plain(logits) = &model.params {
            if logits.len() != model.structure.param_count() {
                return Err(TrainError::Length {
                    expected: model.structure.param_count(),
                    actual: logits.len(),
                });
            }
        }
        Ok(model)
    }

    /// Plain circuit with logits drawn from `N(0, 0.5²)`.
    pub fn plain(structure: CircuitStructure, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, 0.5).expect("valid normal");
        let logits = (0..structure.param_count())
            .map(|_| dist.sample(&mut rng))
            .collect();
        Self {
            structure,
            params: Params::Plain(logits),
        }
    }

    pub fn hyper(
        structure: CircuitStructure,
        embed_dim: usize,
        decoder: DecoderConfig,
        seed: u64,
    ) -> Result<Self, TrainError> {
        let hp = init_hyper(&structure, embed_dim, decoder, seed)?;
        Ok(Self {
            structure,
            params: Params::Hyper(hp),
        })
    }

    pub fn structure(&self) -> &CircuitStructure {
        &self.structure
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn is_plain(&self) -> bool {
        matches!(self.params, Params::Plain(_))
    }

    pub fn trainable_count(&self) -> usize {
        match &self.params {
            Params::Plain(logits) => logits.len(),
            Params::Hyper(hp) => hp.param_count(),
        }
    }

    pub fn trainables(&self) -> Vec<f64> {
        match &self.params {
            Params::Plain(logits) => logits.clone(),
            Params::Hyper(hp) => hp.to_flat(),
        }
    }

    pub fn set_trainables(&mut self, values: &[f64]) -> Result<(), TrainError> {
        let expected = self.trainable_count();
        if values.len() != expected {
            return Err(TrainError::Length {
                expected,
                actual: values.len(),
            });
        }
        match &mut self.params {
            Params::Plain(logits) => logits.copy_from_slice(values),
            Params::Hyper(hp) => hp.load_flat(values)?,
        }
        Ok(())
    }

    fn logits(&self) -> Vec<f64> {
        match &self.params {
            Params::Plain(logits) => logits.clone(),
            Params::Hyper(hp) => hp.all_logits(&self.structure),
        }
    }

    /// Materialized, normalized circuit weights.
    pub fn weights(&self) -> WeightStore {
        match &self.params {
            Params::Plain(logits) => {
                WeightStore::from_logits(&self.structure, logits).expect("validated length")
            }
            Params::Hyper(hp) => materialize_all(hp, &self.structure),
        }
    }

    pub fn log_density_rows(&self, data: &BinaryMatrix) -> Result<Vec<f64>, EvalError> {
        log_density_rows(&self.structure, &self.weights(), data)
    }
}

/// Mean negative log-likelihood of the complete rows in `batch`.
pub fn nll_loss(model: &TrainableModel, batch: &BinaryMatrix) -> Result<f64, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let lls = model.log_density_rows(batch)?;
    Ok(-lls.iter().sum::<f64>() / lls.len() as f64)
}

/// Loss and its exact gradient with respect to every trainable.
pub fn gradient(
    model: &TrainableModel,
    batch: &BinaryMatrix,
) -> Result<(f64, Vec<f64>), TrainError> {
    let rows: Vec<usize> = (0..batch.rows()).collect();
    gradient_rows(model, batch, &rows)
}

/// Like [`gradient`] over the rows `rows` of `data`.
pub fn gradient_rows(
    model: &TrainableModel,
    data: &BinaryMatrix,
    rows: &[usize],
) -> Result<(f64, Vec<f64>), TrainError> {
    if rows.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let structure = &model.structure;
    let logits = model.logits();
    let weights = WeightStore::from_logits(structure, &logits).expect("logits cover every sector");
    let (total, log_w_grad) = log_weight_gradient(structure, &weights, data, rows)?;
    let scale = -1.0 / rows.len() as f64;

    // Through the row-wise log-softmax: dθ_j = g_j - w_j Σ g.
    let mut logit_grad = vec![0.0; logits.len()];
    let w = weights.weights();
    for sector in structure.sectors() {
        for row in 0..sector.rows {
            let start = sector.offset + row * sector.cols;
            let range = start..start + sector.cols;
            let g_sum: f64 = log_w_grad[range.clone()].iter().sum();
            for j in range {
                logit_grad[j] = scale * (log_w_grad[j] - w[j] * g_sum);
            }
        }
    }

    let grad = match &model.params {
        Params::Plain(_) => logit_grad,
        Params::Hyper(hp) => hp.pullback(structure, &logit_grad),
    };
    Ok((total * scale, grad))
}
