use super::adam::{adam_step, AdamConfig, OptState};
use super::model::{gradient_rows, TrainError, TrainableModel};
use crate::data::Dataset;
use crate::matrix::BinaryMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PLAIN_LEARNING_RATE: f64 = 2e-2;
pub const HYPER_LEARNING_RATE: f64 = 5e-3;
pub const WEIGHT_DECAY_GRID: [f64; 3] = [1e-3, 1e-4, 1e-5];
pub const EMBED_DIM_GRID: [usize; 3] = [5, 10, 20];
pub const BATCH_SIZE: usize = 500;
pub const MAX_STEPS: u64 = 80_000;
pub const PATIENCE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_steps: u64,
    /// Optional cap on full passes over the training split.
    pub max_epochs: Option<usize>,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn plain(weight_decay: f64) -> Self {
        Self {
            learning_rate: PLAIN_LEARNING_RATE,
            weight_decay,
            batch_size: BATCH_SIZE,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_steps: MAX_STEPS,
            max_epochs: None,
            patience: PATIENCE,
            seed: 0,
        }
    }

    pub fn hyper() -> Self {
        Self {
            learning_rate: HYPER_LEARNING_RATE,
            weight_decay: 0.0,
            ..Self::plain(0.0)
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub steps: u64,
    /// Mean NLL over the mini-batches of this epoch, measured before each update.
    pub train_nll: f64,
    pub valid_ll: f64,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str = "epoch,steps,train_nll,valid_ll";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.epoch, self.steps, self.train_nll, self.valid_ll
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the best validation log-likelihood.
    pub model: TrainableModel,
    pub best_epoch: usize,
    pub best_valid_ll: f64,
    pub history: Vec<EpochRecord>,
}

pub fn mean_log_likelihood(
    model: &TrainableModel,
    split: &BinaryMatrix,
) -> Result<f64, TrainError> {
    let lls = model.log_density_rows(split)?;
    Ok(lls.iter().sum::<f64>() / lls.len() as f64)
}

pub fn train_loop(
    model: TrainableModel,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_loop_with(model, dataset, config, |_| {})
}

/// Mini-batch Adam with early stopping on validation log-likelihood.
/// `on_epoch` sees every history record as it is produced.
pub fn train_loop_with<F>(
    mut model: TrainableModel,
    dataset: &Dataset,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome, TrainError>
where
    F: FnMut(&EpochRecord),
{
    if dataset.train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if dataset.valid.is_empty() {
        return Err(TrainError::EmptySplit("valid"));
    }
    let adam = config.adam();
    let batch_size = config.batch_size.max(1);
    let mut params = model.trainables();
    let mut opt = OptState::new(params.len());
    let mut order: Vec<usize> = (0..dataset.train.rows()).collect();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, TrainableModel)> = None;
    let mut stale = 0;

    for epoch in 1.. {
        if config.max_epochs.is_some_and(|cap| epoch > cap) || opt.step >= config.max_steps {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut nll_sum = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(batch_size) {
            if opt.step >= config.max_steps {
                break;
            }
            let (loss, grad) = gradient_rows(&model, &dataset.train, batch)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFinite {
                    loss,
                    step: opt.step,
                });
            }
            nll_sum += loss * batch.len() as f64;
            seen += batch.len();
            adam_step(&mut params, &grad, &mut opt, &adam);
            model.set_trainables(&params)?;
        }

        let valid_ll = mean_log_likelihood(&model, &dataset.valid)?;
        if valid_ll.is_nan() {
            return Err(TrainError::NonFinite {
                loss: valid_ll,
                step: opt.step,
            });
        }
        let record = EpochRecord {
            epoch,
            steps: opt.step,
            train_nll: nll_sum / seen.max(1) as f64,
            valid_ll,
        };
        on_epoch(&record);
        history.push(record);

        if best.as_ref().is_none_or(|(_, ll, _)| valid_ll > *ll) {
            best = Some((epoch, valid_ll, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    let (best_epoch, best_valid_ll, model) = best.unwrap_or((0, f64::NEG_INFINITY, model));
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_valid_ll,
        history,
    })
}
