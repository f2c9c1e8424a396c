//! Seed splitting.
//!
//! A run has one 64-bit seed. Each consumer draws from its own ChaCha8 stream,
//! keyed by the same seed and a fixed stream id, so that changing how many
//! numbers one consumer draws never shifts another consumer's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids. The numeric values are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Reference data sampling.
    Data = 1,
    /// Latent vectors for training and generation.
    Latent = 2,
    /// Parameter initialization.
    Init = 3,
    /// Measurement shots.
    Shots = 4,
    /// Minibatch shuffling.
    Shuffle = 5,
    /// Fresh reference draws used only for evaluation.
    Evaluation = 6,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
