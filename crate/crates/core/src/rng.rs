//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed. Child streams
//! are derived from the parent seed and a label through SHA-256, so they do
//! not depend on how much of the parent has been consumed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream named by `label`.
    pub fn child(&self, label: &str) -> RngStream {
        RngStream::new(derive_seed(self.seed, label.as_bytes()))
    }

    pub fn child_index(&self, index: u64) -> RngStream {
        RngStream::new(derive_seed(self.seed, &index.to_le_bytes()))
    }

    /// Uniform on the closed interval `[low, high]`.
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        if low == high {
            return low;
        }
        self.rng.random_range(low..=high)
    }

    /// Uniform integer on `[low, high]`.
    pub fn int_inclusive(&mut self, low: u32, high: u32) -> u32 {
        self.rng.random_range(low..=high)
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.rng.random_range(0..len)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random_bool(p.clamp(0.0, 1.0))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn derive_seed(parent: u64, label: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label);
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
