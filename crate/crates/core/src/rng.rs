//! Deterministic random streams.
//!
//! Every random quantity in the lab is drawn from a `ChaCha8Rng` seeded from a
//! 64-bit value. Independent streams (one per point, per trial, per sweep cell)
//! are derived by mixing a parent seed with an index through SplitMix64, so
//! work can be split across threads without changing any draw.
//!
//! Gaussian samples use the Marsaglia polar method over uniforms built from
//! the top 53 bits of `next_u64`. Both the generator and the transform are
//! platform independent; the only platform dependence left is `f64::ln` and
//! `f64::sqrt` rounding in the polar transform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed: `mix64(parent ^ mix64(index))`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(parent ^ mix64(index))
}

/// Fold a sequence of words into one seed, starting from `base`.
pub fn hash_words(base: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix64(base), |h, &w| mix64(h ^ w))
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream number `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    seeded(derive_seed(seed, index))
}

/// Uniform in [0, 1) with 53 bits of resolution.
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal sampler (Marsaglia polar method) with one cached spare.
#[derive(Debug, Clone, Default)]
pub struct Gaussian {
    spare: Option<f64>,
}

impl Gaussian {
    pub fn new() -> Self {
        Self { spare: None }
    }

    pub fn sample<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * uniform01(rng) - 1.0;
            let v = 2.0 * uniform01(rng) - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}
