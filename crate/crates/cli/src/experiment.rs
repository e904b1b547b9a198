//! Grid search over the regularizer and the three-way size comparison.

use crate::error::CliError;
use hyperspn::circuit::{param_count, CircuitStructure, StructureConfig};
use hyperspn::data::{avg_log_likelihood, Dataset};
use hyperspn::hypernet::{hyper_param_count, DecoderConfig};
use hyperspn::training::{
    mean_log_likelihood, train_loop_with, EpochRecord, TrainConfig, TrainableModel, EMBED_DIM_GRID,
    WEIGHT_DECAY_GRID,
};
use serde::Serialize;

/// Layer width and replica count used in the benchmark experiments.
pub const DEFAULT_WIDTH: usize = 5;
pub const DEFAULT_REPLICAS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Free mixture weights regularized by weight decay.
    Plain,
    /// Weights decoded from sector embeddings.
    Hyper,
}

/// One value of the regularizer grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    WeightDecay(f64),
    EmbedDim(usize),
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Setting::WeightDecay(l) => write!(f, "weight_decay={l}"),
            Setting::EmbedDim(h) => write!(f, "embed_dim={h}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub variant: Variant,
    pub structure: StructureConfig,
    /// Searched for plain models.
    pub weight_decays: Vec<f64>,
    /// Searched for hyper models.
    pub embed_dims: Vec<usize>,
    pub decoder: DecoderConfig,
    /// Optimizer settings; the weight decay is overwritten per grid point.
    pub train: TrainConfig,
    /// Seed for parameter initialization.
    pub init_seed: u64,
}

impl ExperimentSpec {
    /// Default learning rate and regularizer grid for the given variant.
    pub fn new(variant: Variant, structure: StructureConfig) -> Self {
        let train = match variant {
            Variant::Plain => TrainConfig::plain(WEIGHT_DECAY_GRID[0]),
            Variant::Hyper => TrainConfig::hyper(),
        };
        Self {
            variant,
            structure,
            weight_decays: WEIGHT_DECAY_GRID.to_vec(),
            embed_dims: EMBED_DIM_GRID.to_vec(),
            decoder: DecoderConfig::default(),
            train,
            init_seed: structure.seed,
        }
    }

    pub fn settings(&self) -> Vec<Setting> {
        match self.variant {
            Variant::Plain => self
                .weight_decays
                .iter()
                .map(|&l| Setting::WeightDecay(l))
                .collect(),
            Variant::Hyper => self
                .embed_dims
                .iter()
                .map(|&h| Setting::EmbedDim(h))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.settings().is_empty() {
            return Err(CliError::Usage("regularizer grid is empty".into()));
        }
        if self
            .weight_decays
            .iter()
            .any(|l| !(*l >= 0.0 && l.is_finite()))
        {
            return Err(CliError::Usage(
                "weight decay must be finite and non-negative".into(),
            ));
        }
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            return Err(CliError::Usage("learning rate must be positive".into()));
        }
        if self.train.batch_size == 0 {
            return Err(CliError::Usage("batch size must be at least 1".into()));
        }
        Ok(())
    }

    /// Trainable parameter count at one grid point.
    pub fn trainable_count(&self, setting: Setting) -> usize {
        match setting {
            Setting::WeightDecay(_) => param_count(&self.structure),
            Setting::EmbedDim(h) => hyper_param_count(&self.structure, h, &self.decoder),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub setting: Setting,
    pub best_epoch: usize,
    pub epochs: usize,
    pub valid_ll: f64,
}

/// Result record of one experiment; contains no timing so reruns compare equal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub dataset: String,
    pub variant: Variant,
    pub vars: usize,
    pub width: usize,
    pub replicas: usize,
    pub leaves: usize,
    pub selected: Setting,
    pub best_epoch: usize,
    pub valid_ll: f64,
    pub test_ll: f64,
    pub test_stderr: f64,
    pub trainable_count: usize,
    pub param_count: usize,
    pub grid: Vec<GridPoint>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub summary: Summary,
    pub model: TrainableModel,
    /// History of the selected grid point.
    pub history: Vec<EpochRecord>,
}

/// Trains one model per grid point, keeps the one with the best validation
/// log-likelihood (first wins ties) and scores it on the test split.
pub fn run_experiment<F>(
    spec: &ExperimentSpec,
    dataset: &Dataset,
    mut on_epoch: F,
) -> Result<Trained, CliError>
where
    F: FnMut(Setting, &EpochRecord),
{
    spec.validate()?;
    if dataset.vars() != spec.structure.vars {
        return Err(CliError::Usage(format!(
            "dataset has {} variables but the circuit expects {}",
            dataset.vars(),
            spec.structure.vars
        )));
    }
    let structure = CircuitStructure::build(spec.structure)?;
    let mut grid = Vec::new();
    let mut best: Option<(Setting, hyperspn::training::TrainOutcome)> = None;
    for setting in spec.settings() {
        let mut config = spec.train;
        let model = match setting {
            Setting::WeightDecay(l) => {
                config.weight_decay = l;
                TrainableModel::plain(structure.clone(), spec.init_seed)
            }
            Setting::EmbedDim(h) => {
                config.weight_decay = 0.0;
                TrainableModel::hyper(structure.clone(), h, spec.decoder, spec.init_seed)?
            }
        };
        let outcome = train_loop_with(model, dataset, &config, |rec| on_epoch(setting, rec))?;
        grid.push(GridPoint {
            setting,
            best_epoch: outcome.best_epoch,
            epochs: outcome.history.len(),
            valid_ll: outcome.best_valid_ll,
        });
        if best
            .as_ref()
            .is_none_or(|(_, b)| outcome.best_valid_ll > b.best_valid_ll)
        {
            best = Some((setting, outcome));
        }
    }
    let (selected, outcome) = best.expect("grid is not empty");
    let test = avg_log_likelihood(
        outcome.model.structure(),
        &outcome.model.weights(),
        &dataset.test,
    )?;
    if !test.mean.is_finite() {
        return Err(CliError::Numeric(format!(
            "test log-likelihood is {}",
            test.mean
        )));
    }
    debug_assert_eq!(
        mean_log_likelihood(&outcome.model, &dataset.valid)?,
        outcome.best_valid_ll
    );
    let summary = Summary {
        dataset: dataset.name.clone(),
        variant: spec.variant,
        vars: spec.structure.vars,
        width: spec.structure.width,
        replicas: spec.structure.replicas,
        leaves: spec.structure.leaves,
        selected,
        best_epoch: outcome.best_epoch,
        valid_ll: outcome.best_valid_ll,
        test_ll: test.mean,
        test_stderr: test.stderr,
        trainable_count: spec.trainable_count(selected),
        param_count: param_count(&spec.structure),
        grid,
    };
    Ok(Trained {
        summary,
        model: outcome.model,
        history: outcome.history,
    })
}

/// Largest layer width whose plain circuit has at most `budget` weights, or 1
/// when even width 1 exceeds it.
pub fn small_width(config: &StructureConfig, budget: usize) -> usize {
    let mut k = 1;
    while param_count(&StructureConfig {
        width: k + 1,
        ..*config
    }) <= budget
    {
        k += 1;
    }
    k
}

/// The three models of the size comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparePresets {
    /// Plain circuit with the same structure as the hyper model.
    pub large: ExperimentSpec,
    /// Plain circuit shrunk until its weight count matches the hyper model's trainables.
    pub small: ExperimentSpec,
    pub hyper: ExperimentSpec,
}

impl ComparePresets {
    /// `plain` and `hyper` carry the optimizer settings for the two families;
    /// their structure, grids and decoder are replaced.
    pub fn new(
        structure: StructureConfig,
        embed_dim: usize,
        decoder: DecoderConfig,
        weight_decays: Vec<f64>,
        plain: TrainConfig,
        hyper: TrainConfig,
    ) -> Self {
        let budget = hyper_param_count(&structure, embed_dim, &decoder);
        let small_structure = StructureConfig {
            // Tiny circuits can have fewer weights than the decoder; never grow.
            width: small_width(&structure, budget).min(structure.width),
            ..structure
        };
        let base = |variant, structure, train| ExperimentSpec {
            variant,
            structure,
            weight_decays: weight_decays.clone(),
            embed_dims: vec![embed_dim],
            decoder,
            train,
            init_seed: structure.seed,
        };
        Self {
            large: base(Variant::Plain, structure, plain),
            small: base(Variant::Plain, small_structure, plain),
            hyper: base(Variant::Hyper, structure, hyper),
        }
    }

    pub fn named(&self) -> [(&'static str, &ExperimentSpec); 3] {
        [
            ("spn-large", &self.large),
            ("spn-small", &self.small),
            ("hyperspn", &self.hyper),
        ]
    }
}

/// Trains all three presets in order.
pub fn run_compare<F>(
    presets: &ComparePresets,
    dataset: &Dataset,
    mut on_epoch: F,
) -> Result<Vec<(&'static str, Trained)>, CliError>
where
    F: FnMut(&str, Setting, &EpochRecord),
{
    presets
        .named()
        .into_iter()
        .map(|(name, spec)| {
            Ok((
                name,
                run_experiment(spec, dataset, |s, rec| on_epoch(name, s, rec))?,
            ))
        })
        .collect()
}
