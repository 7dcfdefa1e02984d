//! Low-rank adapter state shared by the closed forms and the trainer.

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{ensure_dims, Result};
use crate::rng::{gaussian_matrix, substream};
use crate::scalar::Real;
use crate::stiefel::{sample_stiefel_with, Orientation};

/// Which factor is optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FreezeMode {
    /// `A = Q` fixed with orthonormal rows, `B` trained.
    FreezeA,
    /// `B = U` fixed with orthonormal columns, `A` trained.
    FreezeB,
    /// Both factors trained.
    TrainBoth,
}

/// Starting point for the factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InitScheme {
    /// Random `A`, zero `B`: the update starts at zero.
    #[default]
    Standard,
    /// Zero `A`, random `B`.
    Reversed,
}

/// `ΔW = (α / r) · B · A`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterState<T: Real> {
    pub b: DMatrix<T>,
    pub a: DMatrix<T>,
    pub alpha: T,
    pub freeze_mode: FreezeMode,
}

impl<T: Real> AdapterState<T> {
    pub fn new(b: DMatrix<T>, a: DMatrix<T>, alpha: T, freeze_mode: FreezeMode) -> Result<Self> {
        ensure_dims(b.ncols() == a.nrows() && a.nrows() >= 1, || {
            format!("B is {}x{} but A is {}x{}", b.nrows(), b.ncols(), a.nrows(), a.ncols())
        })?;
        Ok(Self { b, a, alpha, freeze_mode })
    }

    /// Initializes a `d_out × d_in` adapter of rank `rank` with `α = 2r`.
    ///
    /// A frozen factor is a Haar frame. Trained factors start at zero,
    /// except under `TrainBoth` where one side is Gaussian: `A ~ N(0, 1/d_in)`
    /// for [`InitScheme::Standard`], `B ~ N(0, 1/d_out)` for
    /// [`InitScheme::Reversed`].
    pub fn initialize(
        d_out: usize,
        d_in: usize,
        rank: usize,
        freeze_mode: FreezeMode,
        init: InitScheme,
        seed: u64,
    ) -> Result<Self> {
        Self::initialize_with(d_out, d_in, rank, freeze_mode, init, &mut substream(seed, 0))
    }

    pub fn initialize_with<R: RngCore + ?Sized>(
        d_out: usize,
        d_in: usize,
        rank: usize,
        freeze_mode: FreezeMode,
        init: InitScheme,
        rng: &mut R,
    ) -> Result<Self> {
        ensure_dims(rank >= 1 && rank <= d_out.min(d_in), || {
            format!("rank {rank} must be in 1..={}", d_out.min(d_in))
        })?;
        let alpha = T::of_usize(2 * rank);
        let (b, a) = match (freeze_mode, init) {
            (FreezeMode::FreezeA, _) => {
                let q = sample_stiefel_with::<T, R>(rank, d_in, Orientation::RowOrthonormal, rng)?;
                (DMatrix::zeros(d_out, rank), q.into_matrix())
            }
            (FreezeMode::FreezeB, _) => {
                let u = sample_stiefel_with::<T, R>(d_out, rank, Orientation::ColumnOrthonormal, rng)?;
                (u.into_matrix(), DMatrix::zeros(rank, d_in))
            }
            (FreezeMode::TrainBoth, InitScheme::Standard) => {
                let std = T::one() / T::of_usize(d_in).sqrt();
                (DMatrix::zeros(d_out, rank), gaussian_matrix::<T, R>(rng, rank, d_in, std))
            }
            (FreezeMode::TrainBoth, InitScheme::Reversed) => {
                let std = T::one() / T::of_usize(d_out).sqrt();
                (gaussian_matrix::<T, R>(rng, d_out, rank, std), DMatrix::zeros(rank, d_in))
            }
        };
        Ok(Self { b, a, alpha, freeze_mode })
    }

    pub fn rank(&self) -> usize {
        self.a.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.b.nrows()
    }

    pub fn d_in(&self) -> usize {
        self.a.ncols()
    }

    /// `α / r`.
    pub fn scale(&self) -> T {
        self.alpha / T::of_usize(self.rank())
    }

    pub fn effective_update(&self) -> DMatrix<T> {
        (&self.b * &self.a) * self.scale()
    }

    pub fn trainable_params(&self) -> usize {
        match self.freeze_mode {
            FreezeMode::FreezeA => self.b.len(),
            FreezeMode::FreezeB => self.a.len(),
            FreezeMode::TrainBoth => self.a.len() + self.b.len(),
        }
    }
}
