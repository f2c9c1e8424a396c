//! Commands behind the `styleqgan` binary: run configs, model files, and the
//! `train`, `generate`, `evaluate` and `compare` subcommands.
//!
//! Exit codes: 0 success, 2 usage or configuration problems (including bad
//! input files), 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{fit_minmax, fit_power, load_csv, sample_gamma, sample_gaussian3d, save_csv, Preprocessor, SampleSet};
use crate::discriminator::DiscriminatorParams;
use crate::generator::{Architecture, Backend, CircuitLayout, Generator};
use crate::metrics::{
    build_ratio_grid, covariance_eigen_agreement, data_augmentation_check, kl_per_dimension, AugmentationConfig,
    AugmentationReport, BinScale, RatioGrid,
};
use crate::noise::NoiseModel;
use crate::rng::{stream, Stream};
use crate::training::{self, evaluate_checkpoint, train_with_observer, TrainingConfig, TrainingEvent, TrainingLog};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFinite { .. } | Error::Degenerate(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Where the real samples come from. Written as `"gamma"`, `"gaussian3d"` or
/// `"csv:<path>"`.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Gamma,
    Gaussian3d,
    Csv(PathBuf),
}

impl std::str::FromStr for DatasetSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gamma" => Ok(Self::Gamma),
            "gaussian3d" => Ok(Self::Gaussian3d),
            _ => match s.strip_prefix("csv:") {
                Some("") => Err("csv dataset needs a path after `csv:`".into()),
                Some(p) => Ok(Self::Csv(PathBuf::from(p))),
                None => Err(format!("unknown dataset `{s}` (expected gamma, gaussian3d or csv:<path>)")),
            },
        }
    }
}

impl std::fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Gamma => f.write_str("gamma"),
            Self::Gaussian3d => f.write_str("gaussian3d"),
            Self::Csv(p) => write!(f, "csv:{}", p.display()),
        }
    }
}

impl Serialize for DatasetSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DatasetSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PreprocessorKind {
    #[default]
    Minmax,
    /// Yeo-Johnson, standardization, then min-max.
    Power,
}

fn default_n_samples() -> usize {
    10_000
}
fn default_shape() -> f64 {
    1.0
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_eval_bins() -> usize {
    100
}

/// A training run described in JSON. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    /// Rows drawn for synthetic datasets.
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_shape")]
    pub gamma_alpha: f64,
    #[serde(default = "default_shape")]
    pub gamma_beta: f64,
    #[serde(default)]
    pub preprocessor: PreprocessorKind,
    pub epochs: usize,
    #[serde(default = "training::default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "training::default_lr_discriminator")]
    pub lr_discriminator: f64,
    #[serde(default = "training::default_lr_generator")]
    pub lr_generator: f64,
    #[serde(default = "training::default_one")]
    pub discriminator_steps: usize,
    /// Defaults to the preset matching the dataset.
    #[serde(default)]
    pub layout: Option<CircuitLayout>,
    #[serde(default)]
    pub architecture: Architecture,
    pub seed: u64,
    #[serde(default = "training::default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default = "training::default_log_every")]
    pub log_every: usize,
    #[serde(default = "training::default_hidden")]
    pub discriminator_hidden: Vec<usize>,
    #[serde(default = "training::default_slope")]
    pub leaky_slope: f64,
    #[serde(default = "training::default_init_scale")]
    pub init_scale: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Generated samples per architecture in `compare`.
    #[serde(default = "default_n_samples")]
    pub eval_samples: usize,
    #[serde(default = "default_eval_bins")]
    pub eval_bins: usize,
    #[serde(default)]
    pub log_dims: Vec<usize>,
    /// Evaluate with this many shots per sample instead of exact expectations.
    #[serde(default)]
    pub eval_shots: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    /// Parses, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DatasetSpec::Csv(p) = &config.dataset {
            if p.is_relative() {
                config.dataset = DatasetSpec::Csv(base.join(p));
            }
        }
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn layout(&self) -> CircuitLayout {
        self.layout.clone().unwrap_or_else(|| match self.dataset {
            DatasetSpec::Gamma => CircuitLayout::gamma_1d(),
            DatasetSpec::Gaussian3d => CircuitLayout::gaussian_3d(),
            DatasetSpec::Csv(_) => CircuitLayout::lhc(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let DatasetSpec::Csv(p) = &self.dataset {
            if !p.is_file() {
                return Err(Error::Config(format!("dataset: file not found: {}", p.display())));
            }
        }
        if self.eval_bins == 0 {
            return Err(Error::Config("eval_bins must be positive".into()));
        }
        if self.eval_shots == Some(0) {
            return Err(Error::Config("eval_shots must be positive".into()));
        }
        let layout = self.layout();
        let dim = match self.dataset {
            DatasetSpec::Gamma => Some(1),
            DatasetSpec::Gaussian3d => Some(3),
            DatasetSpec::Csv(_) => None,
        };
        if let Some(dim) = dim {
            if layout.n_qubits != dim {
                return Err(Error::Config(format!(
                    "layout: dataset {} has {dim} dimensions but the layout has {} qubits",
                    self.dataset, layout.n_qubits
                )));
            }
        }
        if let Some(&d) = self.log_dims.iter().find(|&&d| d >= layout.n_qubits) {
            return Err(Error::Config(format!("log_dims: dimension {d} out of range")));
        }
        self.training_config().validate()
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_discriminator: self.lr_discriminator,
            lr_generator: self.lr_generator,
            discriminator_steps: self.discriminator_steps,
            layout: self.layout(),
            architecture: self.architecture,
            seed: self.seed,
            checkpoint_every: self.checkpoint_every,
            log_every: self.log_every,
            discriminator_hidden: self.discriminator_hidden.clone(),
            leaky_slope: self.leaky_slope,
            init_scale: self.init_scale,
        }
    }

    /// Raw samples for training, drawn from the data stream or read from disk.
    pub fn load_dataset(&self) -> Result<SampleSet> {
        let set = self.draw_reference(self.n_samples, Stream::Data)?;
        let n = self.layout().n_qubits;
        if set.dim != n {
            return Err(Error::Config(format!(
                "dataset: {} columns but the layout has {n} qubits",
                set.dim
            )));
        }
        Ok(set)
    }

    /// Fresh synthetic draws on `which`; CSV datasets always return the file.
    fn draw_reference(&self, n: usize, which: Stream) -> Result<SampleSet> {
        let mut rng = stream(self.seed, which);
        match &self.dataset {
            DatasetSpec::Gamma => sample_gamma(n, self.gamma_alpha, self.gamma_beta, &mut rng),
            DatasetSpec::Gaussian3d => Ok(sample_gaussian3d(n, &mut rng)),
            DatasetSpec::Csv(p) => load_csv(p),
        }
    }

    pub fn fit_preprocessor(&self, raw: &SampleSet) -> Result<Preprocessor> {
        match self.preprocessor {
            PreprocessorKind::Minmax => fit_minmax(raw),
            PreprocessorKind::Power => fit_power(raw),
        }
    }

    fn eval_backend(&self) -> Backend<'static> {
        match self.eval_shots {
            Some(s) => Backend::Shots(s),
            None => Backend::Exact,
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Everything needed to generate samples from a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub architecture: Architecture,
    pub layout: CircuitLayout,
    pub generator_params: Vec<f64>,
    pub discriminator: DiscriminatorParams,
    pub preprocessor: Preprocessor,
    pub training: TrainingConfig,
    pub seed: u64,
    pub final_loss_generator: Option<f64>,
    pub final_loss_discriminator: Option<f64>,
    pub columns: Vec<String>,
}

impl ModelFile {
    pub fn generator(&self) -> Result<Generator> {
        Generator::new(self.architecture, self.layout.clone(), self.generator_params.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.generator()?;
        self.discriminator.validate()?;
        let n = self.layout.n_qubits;
        for (what, actual) in [
            ("discriminator input", self.discriminator.input_dim()),
            ("preprocessor dimension", self.preprocessor.dim()),
            ("column names", self.columns.len()),
        ] {
            if actual != n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: n,
                    actual,
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let model: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("corrupt model file {}: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }
}

fn model_file(
    config: &TrainingConfig,
    generator: &Generator,
    discriminator: &DiscriminatorParams,
    preprocessor: &Preprocessor,
    columns: &[String],
    last: Option<&training::EpochRecord>,
) -> ModelFile {
    ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        architecture: generator.architecture,
        layout: generator.layout.clone(),
        generator_params: generator.params.clone(),
        discriminator: discriminator.clone(),
        preprocessor: preprocessor.clone(),
        training: config.clone(),
        seed: config.seed,
        final_loss_generator: last.map(|r| r.loss_generator),
        final_loss_discriminator: last.map(|r| r.loss_discriminator),
        columns: columns.to_vec(),
    }
}

/// Trains from a run config. `checkpoint` receives intermediate model files.
pub fn train_run<F>(config: &RunConfig, mut checkpoint: F) -> Result<(ModelFile, TrainingLog)>
where
    F: FnMut(&ModelFile) -> Result<()>,
{
    let raw = config.load_dataset()?;
    let preprocessor = config.fit_preprocessor(&raw)?;
    let real = preprocessor.transform(&raw)?;
    let tc = config.training_config();
    let trained = train_with_observer(&tc, &real, |ev| {
        if let TrainingEvent::EpochEnd {
            record,
            generator,
            discriminator,
            checkpoint: true,
        } = ev
        {
            checkpoint(&model_file(&tc, generator, discriminator, &preprocessor, &raw.columns, Some(record)))?;
        }
        Ok(())
    })?;
    let model = model_file(
        &tc,
        &trained.generator,
        &trained.discriminator,
        &preprocessor,
        &raw.columns,
        trained.log.records.last(),
    );
    Ok((model, trained.log))
}

/// Writes `model.json`, `losses.csv` and a rolling `checkpoint.json` into the
/// config's output directory.
pub fn cmd_train(config_path: &Path) -> Result<PathBuf> {
    let config = RunConfig::load(config_path)?;
    fs::create_dir_all(&config.output_dir)?;
    let checkpoint_path = config.output_dir.join("checkpoint.json");
    let (model, log) = train_run(&config, |m| m.save(&checkpoint_path))?;
    let model_path = config.output_dir.join("model.json");
    model.save(&model_path)?;
    log.write_csv(fs::File::create(config.output_dir.join("losses.csv"))?)?;
    Ok(model_path)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenerateBackend {
    Exact,
    Shots(u64),
    Noisy { model: NoiseModel, shots: u64 },
}

/// `n` samples in data space. Latents use the seed's latent stream and
/// measurements its shot stream.
pub fn generate(model: &ModelFile, n: usize, backend: &GenerateBackend, seed: u64) -> Result<SampleSet> {
    let generator = model.generator()?;
    let backend = match backend {
        GenerateBackend::Exact => Backend::Exact,
        GenerateBackend::Shots(s) => Backend::Shots(*s),
        GenerateBackend::Noisy { model: noise, shots } => {
            if noise.n_qubits() != generator.layout.n_qubits {
                return Err(Error::InvalidNoise(format!(
                    "calibration covers {} qubits, model has {}",
                    noise.n_qubits(),
                    generator.layout.n_qubits
                )));
            }
            noise.validate()?;
            Backend::Noisy { model: noise, shots: *shots }
        }
    };
    let mut latent_rng = stream(seed, Stream::Latent);
    let mut shot_rng = stream(seed, Stream::Shots);
    let set = evaluate_checkpoint(
        &generator,
        n,
        backend,
        Some(&model.preprocessor),
        &mut latent_rng,
        &mut shot_rng,
    )?;
    Ok(set.with_columns(model.columns.clone()))
}

/// Per-pair ratio grids, KL per dimension, eigenvalue agreement and, when both
/// sets are large enough, the data-augmentation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dim: usize,
    pub n_reference: usize,
    pub n_generated: usize,
    pub bins: usize,
    pub log_dims: Vec<usize>,
    pub kl_per_dimension: Vec<f64>,
    pub eigenvalue_agreement: Option<f64>,
    pub ratio_grids: Vec<RatioGrid>,
    pub data_augmentation: Vec<AugmentationReport>,
}

pub fn evaluate(reference: &SampleSet, generated: &SampleSet, bins: usize, log_dims: &[usize]) -> Result<EvaluationReport> {
    if reference.dim != generated.dim {
        return Err(Error::LengthMismatch {
            what: "sample dimension",
            expected: reference.dim,
            actual: generated.dim,
        });
    }
    if let Some(&d) = log_dims.iter().find(|&&d| d >= reference.dim) {
        return Err(Error::InvalidArgument(format!("log dimension {d} out of range")));
    }
    let scale = |d: usize| if log_dims.contains(&d) { BinScale::Log } else { BinScale::Linear };
    let kl = kl_per_dimension(reference, generated, bins, log_dims)?;
    let (eigenvalue_agreement, ratio_grids) = if reference.dim >= 2 {
        let agreement = covariance_eigen_agreement(reference, generated)?;
        let mut grids = Vec::new();
        for i in 0..reference.dim {
            for j in i + 1..reference.dim {
                grids.push(build_ratio_grid(reference, generated, (i, j), (bins, bins), (scale(i), scale(j)))?);
            }
        }
        (Some(agreement), grids)
    } else {
        (None, Vec::new())
    };
    let aug = AugmentationConfig::default();
    let data_augmentation = if reference.len() >= aug.large_size && generated.len() >= aug.large_size {
        (0..reference.dim)
            .map(|d| data_augmentation_check(|n| Ok(reference.head(n)), generated, d, scale(d), &aug))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(EvaluationReport {
        dim: reference.dim,
        n_reference: reference.len(),
        n_generated: generated.len(),
        bins,
        log_dims: log_dims.to_vec(),
        kl_per_dimension: kl,
        eigenvalue_agreement,
        ratio_grids,
        data_augmentation,
    })
}

/// Writes the JSON report to `out` and each ratio grid next to it as
/// `<stem>.ratio_<i>_<j>.csv`.
pub fn cmd_evaluate(reference: &Path, generated: &Path, bins: usize, log_dims: &[usize], out: &Path) -> Result<()> {
    let report = evaluate(&load_csv(reference)?, &load_csv(generated)?, bins, log_dims)?;
    fs::write(out, serde_json::to_string_pretty(&report)?)?;
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
    for grid in &report.ratio_grids {
        let name = format!("{stem}.ratio_{}_{}.csv", grid.dims.0, grid.dims.1);
        grid.write_csv(fs::File::create(out.with_file_name(name))?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub architecture: Architecture,
    pub n_params: usize,
    pub kl_per_dimension: Vec<f64>,
    pub eigenvalue_agreement: Option<f64>,
    pub final_loss_generator: Option<f64>,
    pub final_loss_discriminator: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub dataset: String,
    pub seed: u64,
    pub epochs: usize,
    pub layout: CircuitLayout,
    pub eval_samples: usize,
    pub bins: usize,
    pub rows: Vec<ComparisonRow>,
}

/// Trains the style and standard architectures under one config and seed and
/// scores both against the same fresh reference sample.
pub fn compare(config: &RunConfig) -> Result<ComparisonReport> {
    let raw = config.load_dataset()?;
    let preprocessor = config.fit_preprocessor(&raw)?;
    let real = preprocessor.transform(&raw)?;
    let reference = config.draw_reference(config.eval_samples, Stream::Evaluation)?;
    let run = |architecture: Architecture| -> Result<ComparisonRow> {
        let mut tc = config.training_config();
        tc.architecture = architecture;
        let trained = training::train(&tc, &real)?;
        let mut latent_rng = stream(config.seed, Stream::Latent);
        let mut shot_rng = stream(config.seed, Stream::Shots);
        let generated = evaluate_checkpoint(
            &trained.generator,
            config.eval_samples,
            config.eval_backend(),
            Some(&preprocessor),
            &mut latent_rng,
            &mut shot_rng,
        )?;
        let last = trained.log.records.last();
        Ok(ComparisonRow {
            architecture,
            n_params: trained.generator.n_params(),
            kl_per_dimension: kl_per_dimension(&reference, &generated, config.eval_bins, &config.log_dims)?,
            eigenvalue_agreement: if reference.dim >= 2 {
                Some(covariance_eigen_agreement(&reference, &generated)?)
            } else {
                None
            },
            final_loss_generator: last.map(|r| r.loss_generator),
            final_loss_discriminator: last.map(|r| r.loss_discriminator),
        })
    };
    let (style, standard) = rayon::join(|| run(Architecture::Style), || run(Architecture::Standard));
    Ok(ComparisonReport {
        dataset: config.dataset.to_string(),
        seed: config.seed,
        epochs: config.epochs,
        layout: config.layout(),
        eval_samples: config.eval_samples,
        bins: config.eval_bins,
        rows: vec![style?, standard?],
    })
}

pub fn cmd_compare(config_path: &Path, out: &Path) -> Result<ComparisonReport> {
    let config = RunConfig::load(config_path)?;
    let report = compare(&config)?;
    fs::write(out, serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Debug, Parser)]
#[command(name = "styleqgan", version, about = "Style-based quantum GAN trainer and sampler")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a JSON run config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Draw samples from a trained model into a CSV file.
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        /// Exact expectations (the default).
        #[arg(long, conflicts_with = "shots")]
        exact: bool,
        /// Estimate each sample from this many measurements.
        #[arg(long)]
        shots: Option<u64>,
        /// Device calibration JSON; requires --shots.
        #[arg(long, requires = "shots")]
        noise: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a generated CSV against a reference CSV.
    Evaluate {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        /// Comma-separated dimensions binned logarithmically.
        #[arg(long, value_delimiter = ',')]
        log_dims: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train style and standard generators under one config and report both.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train { config } => {
            let path = cmd_train(&config)?;
            println!("{}", path.display());
        }
        Command::Generate {
            model,
            n,
            exact: _,
            shots,
            noise,
            seed,
            out,
        } => {
            let model = ModelFile::load(&model)?;
            let backend = match (noise, shots) {
                (Some(path), Some(shots)) => {
                    let text = fs::read_to_string(&path)?;
                    GenerateBackend::Noisy {
                        model: NoiseModel::from_json(&text)?,
                        shots,
                    }
                }
                (None, Some(shots)) => GenerateBackend::Shots(shots),
                _ => GenerateBackend::Exact,
            };
            save_csv(&generate(&model, n, &backend, seed)?, &out)?;
        }
        Command::Evaluate {
            reference,
            generated,
            bins,
            log_dims,
            out,
        } => cmd_evaluate(&reference, &generated, bins, &log_dims, &out)?,
        Command::Compare { config, out } => {
            let report = cmd_compare(&config, &out)?;
            for row in &report.rows {
                println!(
                    "{:<9} params {:>3}  KL {:?}",
                    format!("{:?}", row.architecture).to_lowercase(),
                    row.n_params,
                    row.kl_per_dimension
                );
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_spec_parsing() {
        assert_eq!("gamma".parse::<DatasetSpec>().unwrap(), DatasetSpec::Gamma);
        assert_eq!(
            "csv:events.csv".parse::<DatasetSpec>().unwrap(),
            DatasetSpec::Csv(PathBuf::from("events.csv"))
        );
        assert!("csv:".parse::<DatasetSpec>().is_err());
        assert!("normal".parse::<DatasetSpec>().is_err());
    }

    #[test]
    fn config_defaults_and_unknown_keys() {
        let c = RunConfig::from_json(r#"{"dataset": "gamma", "epochs": 5, "seed": 1}"#).unwrap();
        assert_eq!(c.batch_size, 128);
        assert_eq!(c.lr_discriminator, 0.1);
        assert_eq!(c.lr_generator, 0.5);
        assert_eq!(c.layout().n_params(c.architecture), 10);
        c.validate().unwrap();
        let err = RunConfig::from_json(r#"{"dataset": "gamma", "epochs": 5, "seed": 1, "epoch": 3}"#).unwrap_err();
        assert!(err.to_string().contains("epoch"), "{err}");
        let missing = RunConfig::from_json(r#"{"dataset": "gamma", "seed": 1}"#).unwrap_err();
        assert!(missing.to_string().contains("epochs"));
    }

    #[test]
    fn layout_must_match_dataset() {
        let c = RunConfig::from_json(
            r#"{"dataset": "gamma", "epochs": 1, "seed": 1,
                "layout": {"n_qubits": 3, "n_layers": 1, "d_latent": 3, "entangler": [[0,1],[1,2]]}}"#,
        )
        .unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(
            exit_code(&Error::NonFinite {
                epoch: 3,
                detail: "nan".into()
            }),
            EXIT_NUMERICAL
        );
        assert_eq!(run(["styleqgan", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["styleqgan", "--help"]), EXIT_OK);
    }

    #[test]
    fn evaluate_identical_sets() {
        let mut rng = stream(3, Stream::Data);
        let s = sample_gaussian3d(500, &mut rng);
        let r = evaluate(&s, &s, 20, &[]).unwrap();
        assert_eq!(r.kl_per_dimension, vec![0.0; 3]);
        assert_eq!(r.eigenvalue_agreement, Some(0.0));
        assert_eq!(r.ratio_grids.len(), 3);
        assert!(r.data_augmentation.is_empty());
        let one = SampleSet::new(1, vec![vec![0.0]]).unwrap();
        assert!(evaluate(&s, &one, 20, &[]).is_err());
    }

    #[test]
    fn zero_epoch_compare_reports_both_architectures() {
        let c = RunConfig::from_json(
            r#"{"dataset": "gaussian3d", "epochs": 0, "seed": 2, "n_samples": 500, "eval_samples": 500,
                "eval_bins": 20,
                "layout": {"n_qubits": 3, "n_layers": 2, "d_latent": 5, "entangler": [[0,1],[1,2]]}}"#,
        )
        .unwrap();
        let r = compare(&c).unwrap();
        assert_eq!(r.rows[0].n_params, 62);
        assert_eq!(r.rows[1].n_params, 36);
        for row in &r.rows {
            assert_eq!(row.kl_per_dimension.len(), 3);
            assert!(row.kl_per_dimension.iter().all(|k| k.is_finite() && *k > 0.0));
            assert!(row.final_loss_generator.is_none());
        }
    }
}
