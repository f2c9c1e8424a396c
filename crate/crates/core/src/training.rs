//! The adversarial loop: per epoch, `k` discriminator updates on `-L_D`
//! followed by one generator update on `L_G`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Preprocessor, SampleSet, SpaceTag};
use crate::discriminator::{
    grads_discriminator, generator_loss_and_grad, loss_discriminator, AdadeltaState, DiscriminatorParams,
};
use crate::generator::{Architecture, Backend, CircuitLayout, Generator, LatentVector};
use crate::rng::{stream, Stream};
use crate::{Error, Result};

pub(crate) fn default_batch_size() -> usize {
    128
}
pub(crate) fn default_lr_discriminator() -> f64 {
    0.1
}
pub(crate) fn default_lr_generator() -> f64 {
    0.5
}
pub(crate) fn default_one() -> usize {
    1
}
pub(crate) fn default_log_every() -> usize {
    100
}
pub(crate) fn default_checkpoint_every() -> usize {
    1000
}
pub(crate) fn default_hidden() -> Vec<usize> {
    vec![64, 32]
}
pub(crate) fn default_slope() -> f64 {
    0.2
}
pub(crate) fn default_init_scale() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr_discriminator")]
    pub lr_discriminator: f64,
    #[serde(default = "default_lr_generator")]
    pub lr_generator: f64,
    /// Discriminator updates per epoch.
    #[serde(default = "default_one")]
    pub discriminator_steps: usize,
    pub layout: CircuitLayout,
    #[serde(default)]
    pub architecture: Architecture,
    pub seed: u64,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default = "default_hidden")]
    pub discriminator_hidden: Vec<usize>,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    /// Generator parameters start uniform in `±init_scale`.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

impl TrainingConfig {
    pub fn new(layout: CircuitLayout, epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size: default_batch_size(),
            lr_discriminator: default_lr_discriminator(),
            lr_generator: default_lr_generator(),
            discriminator_steps: 1,
            layout,
            architecture: Architecture::Style,
            seed,
            checkpoint_every: default_checkpoint_every(),
            log_every: default_log_every(),
            discriminator_hidden: default_hidden(),
            leaky_slope: default_slope(),
            init_scale: default_init_scale(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        let counts = [
            ("batch_size", self.batch_size),
            ("discriminator_steps", self.discriminator_steps),
            ("checkpoint_every", self.checkpoint_every),
            ("log_every", self.log_every),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("lr_discriminator", self.lr_discriminator),
            ("lr_generator", self.lr_generator),
            ("init_scale", self.init_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return Err(Error::Config(format!("leaky_slope must be nonnegative, got {}", self.leaky_slope)));
        }
        if self.discriminator_hidden.is_empty() || self.discriminator_hidden.contains(&0) {
            return Err(Error::Config("discriminator_hidden needs positive widths".into()));
        }
        Ok(())
    }
}

/// Choices the loop makes that are not fixed by the model definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPolicy {
    pub discriminator_steps: usize,
    /// Each discriminator and generator update draws its own latent batch.
    pub fresh_latents_per_step: bool,
    /// Real batches are drawn without replacement from a reshuffled pass.
    pub shuffle_without_replacement: bool,
    pub backend: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Generator loss evaluated before the generator update.
    pub loss_generator: f64,
    /// Discriminator objective before the last discriminator update.
    pub loss_discriminator: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub policy: TrainingPolicy,
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    /// Losses only; wall time differs between otherwise identical runs.
    pub fn losses(&self) -> Vec<(usize, f64, f64)> {
        self.records
            .iter()
            .map(|r| (r.epoch, r.loss_generator, r.loss_discriminator))
            .collect()
    }

    /// CSV with the policy in leading `#` comment lines.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# discriminator_steps={}", self.policy.discriminator_steps)?;
        writeln!(out, "# fresh_latents_per_step={}", self.policy.fresh_latents_per_step)?;
        writeln!(out, "# shuffle_without_replacement={}", self.policy.shuffle_without_replacement)?;
        writeln!(out, "# backend={}", self.policy.backend)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "loss_generator", "loss_discriminator", "wall_seconds"])?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                format!("{:?}", r.loss_generator),
                format!("{:?}", r.loss_discriminator),
                format!("{:?}", r.wall_seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Progress notifications from [`train_with_observer`].
#[derive(Debug)]
pub enum TrainingEvent<'a> {
    DiscriminatorUpdate { epoch: usize, optimizer_steps: u64 },
    GeneratorUpdate { epoch: usize, optimizer_steps: u64 },
    EpochEnd {
        record: &'a EpochRecord,
        generator: &'a Generator,
        discriminator: &'a DiscriminatorParams,
        /// Set every `checkpoint_every` epochs and on the last epoch.
        checkpoint: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub generator: Generator,
    pub discriminator: DiscriminatorParams,
    pub generator_optimizer: AdadeltaState,
    pub discriminator_optimizer: AdadeltaState,
    pub log: TrainingLog,
}

/// Cycles through a dataset in shuffled passes, never repeating a row within
/// a pass. A partial tail is dropped and the next pass reshuffles.
struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    fn new(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            cursor: n,
        }
    }

    fn next<R: Rng + ?Sized>(&mut self, batch: usize, rng: &mut R) -> &[usize] {
        if self.cursor + batch > self.order.len() {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += batch;
        &self.order[start..self.cursor]
    }
}

fn latent_batch<R: Rng + ?Sized>(n: usize, d_latent: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| LatentVector::sample(d_latent, rng).0).collect()
}

fn fake_batch(generator: &Generator, latents: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    latents.par_iter().map(|z| generator.sample_exact(z)).collect()
}

fn check_finite(epoch: usize, what: &str, values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            epoch,
            detail: format!("{what} contains {v}"),
        });
    }
    Ok(())
}

pub fn train(config: &TrainingConfig, real: &SampleSet) -> Result<TrainedModel> {
    train_with_observer(config, real, |_| Ok(()))
}

/// Deterministic given `config.seed`; parallel sections reduce in a fixed order.
pub fn train_with_observer<F>(config: &TrainingConfig, real: &SampleSet, mut observer: F) -> Result<TrainedModel>
where
    F: FnMut(TrainingEvent<'_>) -> Result<()>,
{
    config.validate()?;
    let n_qubits = config.layout.n_qubits;
    if real.dim != n_qubits {
        return Err(Error::LengthMismatch {
            what: "sample dimension vs qubits",
            expected: n_qubits,
            actual: real.dim,
        });
    }
    if real.len() < config.batch_size {
        return Err(Error::InsufficientSamples(format!(
            "{} real samples for batch size {}",
            real.len(),
            config.batch_size
        )));
    }

    let mut init_rng = stream(config.seed, Stream::Init);
    let mut latent_rng = stream(config.seed, Stream::Latent);
    let mut shuffle_rng = stream(config.seed, Stream::Shuffle);

    let mut generator = Generator::initialize(
        config.architecture,
        config.layout.clone(),
        config.init_scale,
        &mut init_rng,
    )?;
    let mut discriminator =
        DiscriminatorParams::glorot(n_qubits, &config.discriminator_hidden, config.leaky_slope, &mut init_rng)?;
    let mut opt_g = AdadeltaState::new(generator.n_params(), config.lr_generator);
    let mut opt_d = AdadeltaState::new(discriminator.n_params(), config.lr_discriminator);
    let mut sampler = BatchSampler::new(real.len());
    let d_latent = config.layout.d_latent;
    let batch = config.batch_size;

    let log_policy = TrainingPolicy {
        discriminator_steps: config.discriminator_steps,
        fresh_latents_per_step: true,
        shuffle_without_replacement: true,
        backend: "exact".into(),
    };
    let mut records = Vec::with_capacity(config.epochs);
    let start = Instant::now();

    for epoch in 0..config.epochs {
        let mut loss_d = f64::NAN;
        for _ in 0..config.discriminator_steps {
            let real_batch: Vec<Vec<f64>> = sampler
                .next(batch, &mut shuffle_rng)
                .iter()
                .map(|&i| real.rows[i].clone())
                .collect();
            let latents = latent_batch(batch, d_latent, &mut latent_rng);
            let fakes = fake_batch(&generator, &latents)?;
            loss_d = loss_discriminator(&discriminator, &real_batch, &fakes)?;
            let grad = grads_discriminator(&discriminator, &real_batch, &fakes)?;
            check_finite(epoch, "discriminator gradient", &grad)?;
            let mut flat = discriminator.to_flat();
            opt_d.step_in_place(&mut flat, &grad)?;
            check_finite(epoch, "discriminator parameters", &flat)?;
            discriminator.set_flat(&flat)?;
            observer(TrainingEvent::DiscriminatorUpdate {
                epoch,
                optimizer_steps: opt_d.steps,
            })?;
        }

        let latents = latent_batch(batch, d_latent, &mut latent_rng);
        let (loss_g, grad) = generator_loss_and_grad(&discriminator, &generator, &latents)?;
        check_finite(epoch, "losses", &[loss_g, loss_d])?;
        check_finite(epoch, "generator gradient", &grad)?;
        opt_g.step_in_place(&mut generator.params, &grad)?;
        check_finite(epoch, "generator parameters", &generator.params)?;
        observer(TrainingEvent::GeneratorUpdate {
            epoch,
            optimizer_steps: opt_g.steps,
        })?;

        let record = EpochRecord {
            epoch,
            loss_generator: loss_g,
            loss_discriminator: loss_d,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        if (epoch + 1) % config.log_every == 0 {
            log::info!(
                "epoch {} L_G {:.6} L_D {:.6} ({:.1}s)",
                epoch + 1,
                loss_g,
                loss_d,
                record.wall_seconds
            );
        }
        let checkpoint = (epoch + 1) % config.checkpoint_every == 0 || epoch + 1 == config.epochs;
        observer(TrainingEvent::EpochEnd {
            record: &record,
            generator: &generator,
            discriminator: &discriminator,
            checkpoint,
        })?;
        records.push(record);
    }

    Ok(TrainedModel {
        generator,
        discriminator,
        generator_optimizer: opt_g,
        discriminator_optimizer: opt_d,
        log: TrainingLog {
            policy: log_policy,
            records,
        },
    })
}

/// `n_samples` generator outputs, mapped back to data space when a
/// preprocessor is given. Latents come from `latent_rng`; shot sampling draws
/// from `shot_rng` and the exact backend leaves it untouched.
pub fn evaluate_checkpoint<R: Rng + ?Sized, S: Rng + ?Sized>(
    generator: &Generator,
    n_samples: usize,
    backend: Backend<'_>,
    postprocess: Option<&Preprocessor>,
    latent_rng: &mut R,
    shot_rng: &mut S,
) -> Result<SampleSet> {
    let n = generator.layout.n_qubits;
    let latents = latent_batch(n_samples, generator.layout.d_latent, latent_rng);
    let rows = match backend {
        Backend::Exact => fake_batch(generator, &latents)?,
        _ => latents
            .iter()
            .map(|z| generator.sample(z, backend, shot_rng))
            .collect::<Result<_>>()?,
    };
    let mut set = SampleSet::new(n, rows)?;
    set.space = SpaceTag::Transformed;
    match postprocess {
        Some(p) => p.inverse_transform(&set),
        None => Ok(set),
    }
}
