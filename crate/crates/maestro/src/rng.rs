//! Seeded random-number plumbing.
//!
//! Every random decision in the crate flows through an explicit [`RngHandle`]
//! derived from a root seed. There is no global RNG state: a run is a pure
//! function of its config and seed, which is what makes the deterministic-mode
//! guarantees (bit-identical logs, resumable snapshots) possible. Handles are
//! serializable so a training run can be checkpointed mid-stream and resumed
//! without perturbing the random sequence.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Mixes a 64-bit value into a well-distributed child seed (splitmix64 finalizer).
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a root seed and a stream tag. Distinct tags give
/// statistically independent streams; the same (root, tag) pair always gives
/// the same child.
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    mix(root ^ mix(tag))
}

/// A named, owned random stream. Thin wrapper over ChaCha8 so the state can be
/// snapshotted with serde and the sequence is identical across platforms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RngHandle(ChaCha8Rng);

impl RngHandle {
    /// Stream seeded directly from a 64-bit value.
    pub fn from_seed(seed: u64) -> Self {
        RngHandle(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Child stream for `tag`, independent of this handle's own position.
    pub fn derive(root: u64, tag: u64) -> Self {
        Self::from_seed(derive_seed(root, tag))
    }

    /// Uniform integer in `[0, n)`. Uses rejection sampling so the result is
    /// unbiased and reproducible for a given stream position.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index() needs a non-empty range");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.0.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Uniform integer in `[lo, hi]` inclusive.
    pub fn int_in(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.index(hi - lo + 1)
    }

    /// Uniform float in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli draw.
    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Raw 64-bit draw (used to mint fresh environment seeds).
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Samples an index from an explicit probability vector (assumed to sum to
    /// ~1). Any residual mass from rounding goes to the last entry so the draw
    /// is always valid.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        assert!(!probs.is_empty(), "categorical() needs a non-empty distribution");
        let x = self.unit();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if x < acc {
                return i;
            }
        }
        probs.len() - 1
    }

    /// Fisher-Yates shuffle of a slice of indices.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }

    /// Standard normal via Box-Muller (used for small weight inits).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.unit().max(1e-300);
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
