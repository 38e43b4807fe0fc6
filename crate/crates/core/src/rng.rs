//! Seeded randomness. Every stochastic step in the crate draws from a
//! ChaCha8 stream derived from a caller-supplied `u64` seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut SeededRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform draw from `[lo, hi)`.
pub fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Uniform index in `0..n` (`n > 0`).
pub fn index(rng: &mut SeededRng, n: usize) -> usize {
    rng.random_range(0..n)
}

/// Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut SeededRng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// `count` distinct indices from `0..n`, in draw order.
pub fn distinct_indices(rng: &mut SeededRng, n: usize, count: usize) -> alloc::vec::Vec<usize> {
    let mut pool: alloc::vec::Vec<usize> = (0..n).collect();
    let count = count.min(n);
    for i in 0..count {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}
