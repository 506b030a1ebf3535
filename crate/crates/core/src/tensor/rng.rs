use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Seeded random stream used by every stochastic operation.
///
/// The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) keyed by
/// `seed_from_u64(seed)`; independent sub-streams of one seed are selected
/// with ChaCha's 64-bit stream id. Floating draws use the 53-bit mantissa
/// conversion and normals use the ziggurat sampler from `rand_distr`, whose
/// math goes through `libm`, so sequences are reproducible bit-for-bit on
/// every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, 0)
    }

    /// Stream `stream` of `seed`. Different streams never overlap.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform in `[low, high]` (degenerate intervals return `low`).
    pub fn uniform_in(&mut self, low: f64, high: f64) -> f64 {
        if high <= low {
            return low;
        }
        (low + (high - low) * self.uniform()).min(high)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}
