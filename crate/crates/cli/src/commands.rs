//! Command implementations behind the binary, usable without argument parsing.

use crate::error::CliError;
use crate::experiment::{run_compare, run_experiment, ComparePresets, ExperimentSpec, Summary};
use crate::model_file::ModelFile;
use hyperspn::circuit::{
    param_count, sample, stream_eval, CircuitStructure, Evidence, StructureConfig,
};
use hyperspn::data::{
    avg_log_likelihood, gen_synthetic, load_dataset, parzen_score, read_matrix, write_dataset,
    write_matrix, Dataset, LikelihoodSummary, SPLITS,
};
use hyperspn::hypernet::{hyper_param_count, DecoderConfig};
use hyperspn::matrix::BinaryMatrix;
use hyperspn::training::{EpochRecord, Params};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SYNTHETIC: &str = "synthetic";

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// `<dir>/<name>.{train,valid,test}.data`
    Files { dir: PathBuf, name: String },
    /// The generated 256-variable benchmark.
    Synthetic { seed: u64 },
}

impl DataSource {
    /// Files when a directory is given, otherwise the generator if the name asks for it.
    pub fn resolve(dir: Option<PathBuf>, name: &str, seed: u64) -> Result<Self, CliError> {
        match dir {
            Some(dir) => Ok(DataSource::Files {
                dir,
                name: name.to_string(),
            }),
            None if name == SYNTHETIC => Ok(DataSource::Synthetic { seed }),
            None => Err(CliError::Usage(format!(
                "dataset {name:?} needs --data-dir"
            ))),
        }
    }

    pub fn load(&self) -> Result<Dataset, CliError> {
        match self {
            DataSource::Files { dir, name } => Ok(load_dataset(dir, name)?),
            DataSource::Synthetic { seed } => Ok(gen_synthetic(*seed)),
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(EpochRecord::CSV_HEADER);
    out.push('\n');
    for rec in history {
        out.push_str(&rec.csv_line());
        out.push('\n');
    }
    out
}

pub fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    ModelFile::load(path).map_err(|source| CliError::Model {
        path: path.to_path_buf(),
        source,
    })
}

pub const MODEL_FILE: &str = "model.hpc";
pub const HISTORY_FILE: &str = "history.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Runs the grid and writes `model.hpc`, `history.csv` and `summary.json` into `out`.
pub fn train(
    spec: &ExperimentSpec,
    source: &DataSource,
    out: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<Summary, CliError> {
    let dataset = source.load()?;
    create_dir(out)?;
    let trained = run_experiment(spec, &dataset, |setting, rec| {
        log(&format!(
            "{setting} epoch {} valid {:.4}",
            rec.epoch, rec.valid_ll
        ))
    })?;
    let model_path = out.join(MODEL_FILE);
    ModelFile::with_history(trained.model, trained.history.clone())
        .save(&model_path)
        .map_err(|source| CliError::Model {
            path: model_path,
            source,
        })?;
    write_file(&out.join(HISTORY_FILE), &history_csv(&trained.history))?;
    write_file(&out.join(SUMMARY_FILE), &to_json(&trained.summary))?;
    Ok(trained.summary)
}

pub const CURVES_FILE: &str = "curves.csv";
pub const COMPARE_FILE: &str = "compare.json";

/// Trains the three presets; writes `curves.csv` with every epoch of every
/// grid point and `compare.json` with the three summaries.
pub fn compare(
    presets: &ComparePresets,
    source: &DataSource,
    out: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<Vec<(String, Summary)>, CliError> {
    let dataset = source.load()?;
    create_dir(out)?;
    let mut curves = String::from("model,setting,epoch,steps,train_nll,valid_ll\n");
    let results = run_compare(presets, &dataset, |name, setting, rec| {
        let _ = writeln!(curves, "{name},{setting},{}", rec.csv_line());
        log(&format!(
            "{name} {setting} epoch {} valid {:.4}",
            rec.epoch, rec.valid_ll
        ));
    })?;
    write_file(&out.join(CURVES_FILE), &curves)?;
    let summaries: Vec<(String, Summary)> = results
        .into_iter()
        .map(|(name, trained)| {
            let path = out.join(format!("{name}.hpc"));
            ModelFile::with_history(trained.model, trained.history)
                .save(&path)
                .map_err(|source| CliError::Model { path, source })?;
            Ok((name.to_string(), trained.summary))
        })
        .collect::<Result<_, CliError>>()?;
    let table: serde_json::Map<String, serde_json::Value> = summaries
        .iter()
        .map(|(name, s)| (name.clone(), serde_json::to_value(s).expect("serializable")))
        .collect();
    write_file(&out.join(COMPARE_FILE), &to_json(&table))?;
    Ok(summaries)
}

pub fn eval(model: &Path, split: &BinaryMatrix) -> Result<LikelihoodSummary, CliError> {
    let file = load_model(model)?;
    let m = &file.model;
    if split.cols() != m.structure().vars() {
        return Err(CliError::Usage(format!(
            "data has {} columns but the model has {} variables",
            split.cols(),
            m.structure().vars()
        )));
    }
    let summary = avg_log_likelihood(m.structure(), &m.weights(), split)?;
    if !summary.mean.is_finite() {
        return Err(CliError::Numeric(format!(
            "log-likelihood is {}",
            summary.mean
        )));
    }
    Ok(summary)
}

/// Picks one split of a data source.
pub fn split_of(dataset: Dataset, split: &str) -> Result<BinaryMatrix, CliError> {
    match split {
        "train" => Ok(dataset.train),
        "valid" => Ok(dataset.valid),
        "test" => Ok(dataset.test),
        other => Err(CliError::Usage(format!(
            "unknown split {other:?}, expected one of {SPLITS:?}"
        ))),
    }
}

pub fn sample_to(
    model: &Path,
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<BinaryMatrix, CliError> {
    let file = load_model(model)?;
    let m = &file.model;
    let samples = sample(m.structure(), &m.weights(), count, seed)?;
    write_matrix(out, &samples)?;
    Ok(samples)
}

pub fn parzen(test: &Path, samples: &Path, sigma: f64) -> Result<f64, CliError> {
    let score = parzen_score(&read_matrix(test)?, &read_matrix(samples)?, sigma)?;
    if !score.is_finite() {
        return Err(CliError::Numeric(format!("Parzen score is {score}")));
    }
    Ok(score)
}

/// Writes the generated benchmark as `synthetic.{train,valid,test}.data`.
pub fn synth(seed: u64, out: &Path) -> Result<Dataset, CliError> {
    create_dir(out)?;
    let ds = gen_synthetic(seed);
    write_dataset(out, &ds)?;
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Info {
    pub vars: usize,
    pub width: usize,
    pub replicas: usize,
    pub leaves: usize,
    pub param_count: usize,
    pub replica_param_count: usize,
    pub sectors_per_replica: usize,
    pub sector_count: usize,
    pub embed_dim: usize,
    pub hyper_param_count: usize,
    pub peak_live_vectors: usize,
    pub live_vector_bound: usize,
}

/// Size report; the peak is measured by streaming one all-marginal query
/// through a uniform circuit.
pub fn info(
    config: StructureConfig,
    embed_dim: usize,
    decoder: &DecoderConfig,
) -> Result<Info, CliError> {
    let s = CircuitStructure::build(config)?;
    let weights = hyperspn::circuit::WeightStore::uniform(&s);
    let out = stream_eval(&s, &weights, &Evidence::marginal(config.vars))?;
    Ok(Info {
        vars: config.vars,
        width: config.width,
        replicas: config.replicas,
        leaves: config.leaves,
        param_count: param_count(&config),
        replica_param_count: s.replica_param_count(),
        sectors_per_replica: s.sectors_per_replica(),
        sector_count: s.sectors().len(),
        embed_dim,
        hyper_param_count: hyper_param_count(&config, embed_dim, decoder),
        peak_live_vectors: out.peak_live_vectors,
        live_vector_bound: config.vars.ilog2() as usize + 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInfo {
    pub variant: &'static str,
    pub vars: usize,
    pub width: usize,
    pub replicas: usize,
    pub leaves: usize,
    pub trainable_count: usize,
    pub param_count: usize,
    pub epochs: Option<usize>,
}

pub fn describe(model: &Path) -> Result<ModelInfo, CliError> {
    let file = load_model(model)?;
    let m = &file.model;
    let cfg = m.structure().config();
    Ok(ModelInfo {
        variant: match m.params() {
            Params::Plain(_) => "plain",
            Params::Hyper(_) => "hyper",
        },
        vars: cfg.vars,
        width: cfg.width,
        replicas: cfg.replicas,
        leaves: cfg.leaves,
        trainable_count: m.trainable_count(),
        param_count: m.structure().param_count(),
        epochs: file.history.as_ref().map(Vec::len),
    })
}
