//! Labeled deterministic random streams.
//!
//! Every consumer of randomness asks for its own stream by label. A stream is
//! a ChaCha8 generator keyed by `SHA-256(seed || label)`, so adding a new
//! consumer (a new label) never shifts the draws seen by existing ones, and
//! work split across threads stays reproducible as long as each partition
//! derives its stream from a partition-stable label.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"nvsim/rng-stream/v1";

/// A deterministic generator derived from `(seed, label)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

/// Derives the stream for `label` under the run seed.
///
/// # Panics
///
/// Panics if `label` is empty.
pub fn derive_stream(seed: u64, label: &str) -> RngStream {
    assert!(!label.is_empty(), "rng stream label must be non-empty");
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    RngStream {
        inner: ChaCha8Rng::from_seed(key),
    }
}

impl RngStream {
    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Bernoulli draw with success probability `p` (clamped to `[0, 1]`).
    pub fn chance(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            // still consume a draw so stream position does not depend on p
            let _ = self.uniform();
            return true;
        }
        self.uniform() < p.max(0.0)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
