//! Seeded synthetic operands.

use biqgemm::{DenseMatrix, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weights drawn uniformly from `[-1, 1]`.
pub fn uniform_weights<T: Real>(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix<T> {
    DenseMatrix::from_fn(rows, cols, |_, _| T::from_f64(rng.random_range(-1.0..=1.0)))
}

/// Inputs drawn from the standard normal distribution.
pub fn normal_inputs<T: Real>(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix<T> {
    DenseMatrix::from_fn(rows, cols, |_, _| T::from_f64(rng.sample::<f64, _>(StandardNormal)))
}
