use clap::{Args, Parser, Subcommand};
use hyperspn::circuit::StructureConfig;
use hyperspn::data::DEFAULT_SIGMA;
use hyperspn::hypernet::DecoderConfig;
use hyperspn::training::{TrainConfig, BATCH_SIZE, MAX_STEPS, PATIENCE, WEIGHT_DECAY_GRID};
use hyperspn_cli::commands::{self, to_json, DataSource};
use hyperspn_cli::experiment::{DEFAULT_REPLICAS, DEFAULT_WIDTH};
use hyperspn_cli::{CliError, ComparePresets, ExperimentSpec, Variant};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hyperspn",
    version,
    about = "Train and evaluate sum-product networks on binary data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid-search one model family and keep the best validation checkpoint.
    Train(TrainArgs),
    /// Train a large plain, a parameter-matched small plain and a hyper model.
    Compare(CompareArgs),
    /// Average test log-likelihood of a saved model.
    Eval(EvalArgs),
    /// Draw samples from a saved model.
    Sample(SampleArgs),
    /// Parzen window score of samples against test rows.
    Parzen(ParzenArgs),
    /// Write the synthetic benchmark to disk.
    Synth(SynthArgs),
    /// Parameter counts for a structure, or a description of a saved model.
    Info(InfoArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding <dataset>.{train,valid,test}.data.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Dataset name; "synthetic" without --data-dir generates it.
    #[arg(long, default_value = commands::SYNTHETIC)]
    dataset: String,
    /// Seed for the generated dataset.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl DataArgs {
    fn source(&self) -> Result<DataSource, CliError> {
        DataSource::resolve(self.data_dir.clone(), &self.dataset, self.data_seed)
    }
}

#[derive(Args)]
struct StructureArgs {
    /// Sum nodes per layer.
    #[arg(long, default_value_t = DEFAULT_WIDTH)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_REPLICAS)]
    replicas: usize,
    /// Leaf distributions per variable.
    #[arg(long)]
    leaves: Option<usize>,
    /// Seed for the variable permutations.
    #[arg(long, default_value_t = 0)]
    structure_seed: u64,
}

impl StructureArgs {
    fn config(&self, vars: usize) -> StructureConfig {
        let cfg = StructureConfig::new(vars, self.k, self.replicas, self.structure_seed);
        match self.leaves {
            Some(l) => cfg.with_leaves(l),
            None => cfg,
        }
    }
}

#[derive(Args)]
struct OptimArgs {
    /// Learning rate; the family default when omitted.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = BATCH_SIZE)]
    batch: usize,
    #[arg(long, default_value_t = MAX_STEPS)]
    max_steps: u64,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long, default_value_t = PATIENCE)]
    patience: usize,
    /// Seed for initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl OptimArgs {
    fn apply(&self, mut cfg: TrainConfig) -> TrainConfig {
        if let Some(lr) = self.lr {
            cfg.learning_rate = lr;
        }
        cfg.batch_size = self.batch;
        cfg.max_steps = self.max_steps;
        cfg.max_epochs = self.max_epochs;
        cfg.patience = self.patience;
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = Variant::Hyper)]
    variant: Variant,
    #[command(flatten)]
    structure: StructureArgs,
    /// Embedding sizes searched for hyper models.
    #[arg(long, value_delimiter = ',')]
    embed_dim: Vec<usize>,
    /// Weight decay values searched for plain models.
    #[arg(long, value_delimiter = ',')]
    weight_decay: Vec<f64>,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    structure: StructureArgs,
    #[arg(long, default_value_t = 5)]
    embed_dim: usize,
    /// Weight decay values searched for both plain models.
    #[arg(long, value_delimiter = ',')]
    weight_decay: Vec<f64>,
    #[command(flatten)]
    optim: OptimArgs,
    /// Learning rate of the hyper model when --lr is given for the plain ones.
    #[arg(long)]
    hyper_lr: Option<f64>,
    #[arg(long, default_value = "compare")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 500)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ParzenArgs {
    /// Test rows, one comma-separated row per line.
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    sigma: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct InfoArgs {
    /// Describe a saved model instead of a structure.
    #[arg(long, conflicts_with = "vars")]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    vars: usize,
    #[command(flatten)]
    structure: StructureArgs,
    #[arg(long, default_value_t = 5)]
    embed_dim: usize,
}

fn log(line: &str) {
    eprintln!("{line}");
}

fn run(command: Command) -> Result<String, CliError> {
    match command {
        Command::Train(a) => {
            let source = a.data.source()?;
            let vars = source.load()?.vars();
            let mut spec = ExperimentSpec::new(a.variant, a.structure.config(vars));
            if !a.embed_dim.is_empty() {
                spec.embed_dims = a.embed_dim;
            }
            if !a.weight_decay.is_empty() {
                spec.weight_decays = a.weight_decay;
            }
            spec.train = a.optim.apply(spec.train);
            spec.init_seed = a.optim.seed;
            Ok(to_json(&commands::train(&spec, &source, &a.out, &mut log)?))
        }
        Command::Compare(a) => {
            let source = a.data.source()?;
            let vars = source.load()?.vars();
            let decays = if a.weight_decay.is_empty() {
                WEIGHT_DECAY_GRID.to_vec()
            } else {
                a.weight_decay
            };
            let plain = a.optim.apply(TrainConfig::plain(0.0));
            let mut hyper = a.optim.apply(TrainConfig::hyper());
            hyper.learning_rate = a.hyper_lr.unwrap_or(TrainConfig::hyper().learning_rate);
            let mut presets = ComparePresets::new(
                a.structure.config(vars),
                a.embed_dim,
                DecoderConfig::default(),
                decays,
                plain,
                hyper,
            );
            for spec in [&mut presets.large, &mut presets.small, &mut presets.hyper] {
                spec.init_seed = a.optim.seed;
            }
            let summaries = commands::compare(&presets, &source, &a.out, &mut log)?;
            let table: Vec<_> = summaries
                .iter()
                .map(|(name, s)| serde_json::json!({"model": name, "test_ll": s.test_ll, "test_stderr": s.test_stderr, "trainable_count": s.trainable_count}))
                .collect();
            Ok(to_json(&table))
        }
        Command::Eval(a) => {
            let split = commands::split_of(a.data.source()?.load()?, &a.split)?;
            let s = commands::eval(&a.model, &split)?;
            Ok(to_json(
                &serde_json::json!({"mean": s.mean, "stderr": s.stderr, "rows": s.rows}),
            ))
        }
        Command::Sample(a) => {
            let samples = commands::sample_to(&a.model, a.count, a.seed, &a.out)?;
            Ok(to_json(
                &serde_json::json!({"rows": samples.rows(), "out": a.out}),
            ))
        }
        Command::Parzen(a) => Ok(to_json(
            &serde_json::json!({"parzen": commands::parzen(&a.test, &a.samples, a.sigma)?}),
        )),
        Command::Synth(a) => {
            let ds = commands::synth(a.seed, &a.out)?;
            Ok(to_json(&serde_json::json!({
                "vars": ds.vars(),
                "train": ds.train.rows(),
                "valid": ds.valid.rows(),
                "test": ds.test.rows(),
            })))
        }
        Command::Info(a) => match a.model {
            Some(path) => Ok(to_json(&commands::describe(&path)?)),
            None => Ok(to_json(&commands::info(
                a.structure.config(a.vars),
                a.embed_dim,
                &DecoderConfig::default(),
            )?)),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
