//! Labeled, seeded random streams.
//!
//! Every consumer (data, init, latent, shuffle, ...) owns its own stream so
//! that adding draws in one place never shifts the sequence seen by another.

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

/// A ChaCha20 stream keyed by `SHA-256(seed || label)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    label: String,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(label.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        Self {
            seed,
            label: label.to_owned(),
            rng: ChaCha20Rng::from_seed(key),
        }
    }

    /// Independent stream named `<label>/<suffix>` under the same seed.
    pub fn child(&self, suffix: &str) -> Self {
        Self::new(self.seed, &format!("{}/{}", self.label, suffix))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }

    /// Uniform permutation of `0..n` other than the identity. `n` must be at
    /// least 2.
    pub fn non_identity_permutation(&mut self, n: usize) -> Vec<usize> {
        assert!(n >= 2, "no non-identity permutation of {n} items");
        loop {
            let p = self.permutation(n);
            if p.iter().enumerate().any(|(i, &j)| i != j) {
                return p;
            }
        }
    }
}
