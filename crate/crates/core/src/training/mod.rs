//! Maximum-likelihood training of plain and hypernetwork-parameterized circuits.

mod adam;
mod model;
mod train;

pub use adam::{adam_step, AdamConfig, OptState};
pub use model::{gradient, gradient_rows, nll_loss, Params, TrainError, TrainableModel};
pub use train::{
    mean_log_likelihood, train_loop, train_loop_with, EpochRecord, TrainConfig, TrainOutcome,
    BATCH_SIZE, EMBED_DIM_GRID, HYPER_LEARNING_RATE, MAX_STEPS, PATIENCE, PLAIN_LEARNING_RATE,
    WEIGHT_DECAY_GRID,
};
