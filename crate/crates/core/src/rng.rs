//! Seedable random source shared by every stochastic component.
//!
//! The generator is xoshiro256++ (Blackman & Vigna) whose 256-bit state is
//! expanded from a `u64` seed with SplitMix64, exactly as
//! `rand_core::SeedableRng::seed_from_u64` does. Derived draws:
//!
//! * `uniform()` takes the top 53 bits of `next_u64()` and scales by 2⁻⁵³,
//!   giving a value in `[0, 1)`.
//! * `normal()` is Box–Muller on two consecutive uniforms `u1, u2`:
//!   `sqrt(-2 ln(1 - u1)) * cos(2π u2)`. Only the cosine branch is used, so
//!   every normal consumes exactly two `u64` draws.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { inner: Xoshiro256PlusPlus::seed_from_u64(seed) }
    }

    /// Independent stream for a named sub-component of a seeded run.
    pub fn stream(seed: u64, stream: u64) -> Self {
        Self::new(derive_seed(seed, stream))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize % n
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Mixes a base seed with a stream id (golden-ratio increment).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17)
}

/// Stream ids for the seeded components of a pipeline run.
pub mod streams {
    pub const SEMANTIC: u64 = 1;
    pub const SEMANTIC_TO_TOKEN: u64 = 2;
    pub const SPECTRUM: u64 = 3;
    pub const FIRST_DERIVATIVE: u64 = 4;
    pub const SECOND_DERIVATIVE: u64 = 5;
    pub const ANCHOR_JITTER: u64 = 6;
    pub const CLASSIFIER_INIT: u64 = 7;
    pub const TRAIN_ORDER: u64 = 8;
}
