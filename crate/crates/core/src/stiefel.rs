//! Uniform (Haar) sampling on Stiefel manifolds and random low-rank shifts.
//!
//! A frame is drawn by QR-factorizing a matrix of i.i.d. standard Gaussians
//! and flipping each column of the orthogonal factor so that the matching
//! diagonal entry of the triangular factor is positive. With that sign fix
//! the map from Gaussian matrices to frames is equivariant under left
//! rotations, which makes the output exactly Haar distributed.

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{ensure_dims, Error, Result};
use crate::linalg::orthonormality_residual;
use crate::rng::{gaussian_matrix, substream};
use crate::scalar::Real;

/// Which side of a frame is orthonormal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// `F Fᵀ = I` (e.g. a frozen `A = Q`, r × d_in).
    RowOrthonormal,
    /// `Fᵀ F = I` (e.g. a frozen `B = U`, d_out × r).
    ColumnOrthonormal,
}

/// A matrix with orthonormal rows or columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame<T: Real> {
    data: DMatrix<T>,
    orientation: Orientation,
}

impl<T: Real> OrthonormalFrame<T> {
    /// Wraps `data` after checking the orientation invariant.
    pub fn new(data: DMatrix<T>, orientation: Orientation) -> Result<Self> {
        let rows = orientation == Orientation::RowOrthonormal;
        let (k, n) = if rows { (data.nrows(), data.ncols()) } else { (data.ncols(), data.nrows()) };
        ensure_dims(k >= 1 && k <= n, || format!("orthonormal side {k} must be in 1..={n}"))?;
        let residual = orthonormality_residual(&data, rows).to_f64_lossy();
        if !(residual < T::ORTHO_TOL) {
            return Err(Error::InvalidArgument(format!("frame is not orthonormal (residual {residual:e})")));
        }
        Ok(Self { data, orientation })
    }

    /// The identity as a square frame.
    pub fn identity(n: usize, orientation: Orientation) -> Self {
        Self { data: DMatrix::identity(n, n), orientation }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.data
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Number of orthonormal vectors (the rank r of the frame).
    pub fn rank(&self) -> usize {
        match self.orientation {
            Orientation::RowOrthonormal => self.data.nrows(),
            Orientation::ColumnOrthonormal => self.data.ncols(),
        }
    }

    /// Dimension of the space the orthonormal vectors live in.
    pub fn ambient_dim(&self) -> usize {
        match self.orientation {
            Orientation::RowOrthonormal => self.data.ncols(),
            Orientation::ColumnOrthonormal => self.data.nrows(),
        }
    }

    pub fn residual(&self) -> T {
        orthonormality_residual(&self.data, self.orientation == Orientation::RowOrthonormal)
    }

    /// The same frame seen from the other side (`Q` ↔ `Qᵀ`).
    pub fn transposed(&self) -> Self {
        Self {
            data: self.data.transpose(),
            orientation: match self.orientation {
                Orientation::RowOrthonormal => Orientation::ColumnOrthonormal,
                Orientation::ColumnOrthonormal => Orientation::RowOrthonormal,
            },
        }
    }
}

/// Haar-distributed frame of shape `rows × cols`, deterministic in `seed`.
pub fn sample_stiefel<T: Real>(
    rows: usize,
    cols: usize,
    orientation: Orientation,
    seed: u64,
) -> Result<OrthonormalFrame<T>> {
    sample_stiefel_with(rows, cols, orientation, &mut substream(seed, 0))
}

/// As [`sample_stiefel`], drawing from a caller-supplied stream.
pub fn sample_stiefel_with<T: Real, R: RngCore + ?Sized>(
    rows: usize,
    cols: usize,
    orientation: Orientation,
    rng: &mut R,
) -> Result<OrthonormalFrame<T>> {
    ensure_dims(rows.min(cols) >= 1, || format!("frame shape {rows}x{cols} has an empty side"))?;
    let (ambient, k) = match orientation {
        Orientation::ColumnOrthonormal => (rows, cols),
        Orientation::RowOrthonormal => (cols, rows),
    };
    ensure_dims(k <= ambient, || format!("cannot fit {k} orthonormal vectors in dimension {ambient}"))?;

    let g = gaussian_matrix::<T, R>(rng, ambient, k, T::one());
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        if r[(j, j)] < T::zero() {
            q.column_mut(j).neg_mut();
        }
    }
    let data = match orientation {
        Orientation::ColumnOrthonormal => q,
        Orientation::RowOrthonormal => q.transpose(),
    };
    Ok(OrthonormalFrame { data, orientation })
}

/// A `d_out × d_in` matrix of exact rank `rank` and Frobenius norm `scale`.
///
/// Built as the product of two Gaussian factors, then rescaled.
pub fn random_low_rank<T: Real>(d_out: usize, d_in: usize, rank: usize, scale: T, seed: u64) -> Result<DMatrix<T>> {
    random_low_rank_with(d_out, d_in, rank, scale, &mut substream(seed, 0))
}

pub fn random_low_rank_with<T: Real, R: RngCore + ?Sized>(
    d_out: usize,
    d_in: usize,
    rank: usize,
    scale: T,
    rng: &mut R,
) -> Result<DMatrix<T>> {
    ensure_dims(rank >= 1 && rank <= d_out.min(d_in), || format!("rank {rank} must be in 1..={}", d_out.min(d_in)))?;
    if !(scale > T::zero()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let left = gaussian_matrix::<T, R>(rng, d_out, rank, T::one());
    let right = gaussian_matrix::<T, R>(rng, rank, d_in, T::one());
    let mut delta = left * right;
    let norm = delta.norm();
    delta *= scale / norm;
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace;

    #[test]
    fn column_frame_is_orthonormal() {
        for seed in 0..20 {
            let f = sample_stiefel::<f64>(4, 2, Orientation::ColumnOrthonormal, seed).unwrap();
            let gram = f.matrix().transpose() * f.matrix();
            assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-12);
        }
    }

    #[test]
    fn square_frame_is_orthogonal() {
        for seed in 0..20 {
            let f = sample_stiefel::<f64>(3, 3, Orientation::RowOrthonormal, seed).unwrap();
            let det = f.matrix().determinant();
            assert!((det.abs() - 1.0).abs() < 1e-10, "det = {det}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_stiefel::<f64>(6, 2, Orientation::ColumnOrthonormal, 11).unwrap();
        let b = sample_stiefel::<f64>(6, 2, Orientation::ColumnOrthonormal, 11).unwrap();
        let c = sample_stiefel::<f64>(6, 2, Orientation::ColumnOrthonormal, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn oversized_frame_is_a_dimension_error() {
        assert!(matches!(sample_stiefel::<f64>(2, 3, Orientation::ColumnOrthonormal, 0), Err(Error::Dimension(_))));
        assert!(matches!(sample_stiefel::<f64>(3, 2, Orientation::RowOrthonormal, 0), Err(Error::Dimension(_))));
        assert!(sample_stiefel::<f64>(0, 2, Orientation::RowOrthonormal, 0).is_err());
    }

    #[test]
    fn expected_projection_is_scaled_identity() {
        // E[QᵀQ] = (r/d) I for Haar Q, so E Tr[QᵀQ M] = (r/d) Tr[M].
        let (r, d) = (2, 5);
        let g = gaussian_matrix::<f64, _>(&mut substream(99, 0), d, d, 1.0);
        let m = &g + g.transpose();
        let m = &m * &m; // symmetric, positive trace
        let trials = 10_000;
        let mut acc = 0.0;
        for seed in 0..trials {
            let q = sample_stiefel::<f64>(r, d, Orientation::RowOrthonormal, seed).unwrap();
            acc += trace(&(q.matrix().transpose() * q.matrix() * &m));
        }
        let mean = acc / trials as f64;
        let expected = r as f64 / d as f64 * trace(&m);
        assert!((mean - expected).abs() / expected < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn low_rank_has_requested_rank_and_norm() {
        let delta = random_low_rank::<f64>(8, 8, 2, 1.0, 5).unwrap();
        let mut sv: Vec<f64> = delta.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(sv[2] < 1e-10);
        assert!(sv[1] > 1e-3);
        assert!((delta.norm() - 1.0).abs() < 1e-10);

        let full = random_low_rank::<f64>(4, 4, 4, 2.0, 5).unwrap();
        assert!((full.norm() - 2.0).abs() < 1e-10);
        let sv = full.singular_values();
        assert!(sv.iter().all(|&s| s > 1e-8));
    }

    #[test]
    fn low_rank_rejects_bad_rank() {
        assert!(matches!(random_low_rank::<f64>(3, 5, 4, 1.0, 0), Err(Error::Dimension(_))));
        assert!(random_low_rank::<f64>(3, 5, 2, 0.0, 0).is_err());
    }

    #[test]
    fn f32_frames_are_orthonormal_at_single_precision() {
        let f = sample_stiefel::<f32>(16, 4, Orientation::ColumnOrthonormal, 3).unwrap();
        assert!(f.residual() < 1e-5);
    }

    #[test]
    fn frame_constructor_validates() {
        let not_ortho = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(OrthonormalFrame::<f64>::new(not_ortho, Orientation::RowOrthonormal).is_err());
        let ok = DMatrix::from_row_slice(1, 2, &[0.6, 0.8]);
        let f = OrthonormalFrame::<f64>::new(ok, Orientation::RowOrthonormal).unwrap();
        assert_eq!(f.rank(), 1);
        assert_eq!(f.ambient_dim(), 2);
        assert_eq!(f.transposed().orientation(), Orientation::ColumnOrthonormal);
    }
}
