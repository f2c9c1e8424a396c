//! Style-based quantum generative adversarial networks on a small exact
//! circuit simulator.
//!
//! The generator is a layered parameterized circuit of `RY`/`RZ` rotations and
//! controlled-`RY` entanglers in which every gate angle is a linear function of
//! one latent component (`weight * z[m] + bias`). Samples are the negated
//! Pauli-Z expectations of each qubit. A classical feed-forward discriminator
//! is trained against it with binary cross-entropy and ADADELTA.
//!
//! Module map:
//!
//! - [`simulator`]: state vectors, density matrices, shot estimation.
//! - [`noise`]: readout, relaxation and depolarizing channels.
//! - [`generator`]: circuit construction, sampling and exact Jacobians.
//! - [`discriminator`]: the classifier, its losses and the optimizer.
//! - [`training`]: the adversarial loop.
//! - [`data`]: reference samplers, preprocessing, CSV ingestion.
//! - [`metrics`]: histograms, KL divergence, covariance and ratio checks.
//! - [`cli`]: command implementations behind the `styleqgan` binary.

pub mod cli;
pub mod data;
pub mod discriminator;
mod error;
pub mod generator;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};
