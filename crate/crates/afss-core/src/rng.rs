//! Deterministic, parallelism-safe randomness.
//!
//! Every random decision in the pipeline draws from a stream keyed by
//! `(seed, sample_id, stage_tag)` rather than from one shared sequential
//! generator. Streams for different samples are independent, so outputs do
//! not depend on processing order or worker count, and any single sample can
//! be regenerated in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// A ChaCha12 generator keyed by hashing `(seed, sample_id, stage_tag)`.
pub struct RngStream;

impl RngStream {
    /// Derive the generator for one `(sample, stage)` pair.
    ///
    /// The key is `SHA-256(seed_le_bytes || 0x1f || sample_id || 0x1f ||
    /// stage_tag)`; the separator keeps distinct `(sample_id, stage_tag)`
    /// pairs from colliding by concatenation.
    pub fn for_sample(seed: u64, sample_id: &str, stage_tag: &str) -> ChaCha12Rng {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update([0x1f]);
        h.update(sample_id.as_bytes());
        h.update([0x1f]);
        h.update(stage_tag.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        ChaCha12Rng::from_seed(key)
    }

    /// Stream for epoch-level decisions (shuffling, dropout), keyed by the
    /// epoch index so training can resume mid-run bit-exactly.
    pub fn for_epoch(seed: u64, epoch: usize, stage_tag: &str) -> ChaCha12Rng {
        Self::for_sample(seed, &format!("epoch-{epoch}"), stage_tag)
    }
}
