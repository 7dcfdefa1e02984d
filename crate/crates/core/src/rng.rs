//! Seeded random streams.
//!
//! Every random quantity in the crate comes from a ChaCha20 stream built as
//! `ChaCha20Rng::seed_from_u64(seed)` followed by `set_stream(stream)`.
//! Splitting rule: one stream per trial (or per Monte Carlo chunk) index, so
//! work can be spread over threads and still reproduce the same numbers.
//! Gaussian draws are made in `f64` and then converted, which keeps the `f32`
//! and `f64` paths on the same underlying sequence.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Real;

pub type StreamRng = ChaCha20Rng;

/// The generator for `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A derived integer seed, for APIs that take seeds rather than generators.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    substream(seed, index).next_u64()
}

#[inline]
pub fn standard_normal<T: Real, R: RngCore + ?Sized>(rng: &mut R) -> T {
    let x: f64 = StandardNormal.sample(rng);
    T::of(x)
}

/// Matrix of i.i.d. N(0, std²) entries, filled in column-major order.
pub fn gaussian_matrix<T: Real, R: RngCore + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: T) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| standard_normal::<T, R>(rng) * std)
}

pub fn gaussian_vector<T: Real, R: RngCore + ?Sized>(rng: &mut R, len: usize, std: T) -> DVector<T> {
    DVector::from_fn(len, |_, _| standard_normal::<T, R>(rng) * std)
}
