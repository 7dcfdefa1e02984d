//! CCA goodness-of-fit between adapter factors.
//!
//! A factorization `BA` is only defined up to `B → BC`, `A → C⁻¹A` for
//! invertible `C`, so adapters are compared through orthonormal bases of
//! their column space (for `B`) or row space (for `A`):
//! `sim = ‖U_Yᵀ U_X‖²_F / min(r_X, r_Y)`, which lies in `[0, 1]`.

use nalgebra::DMatrix;

use crate::error::{ensure_dims, Error, Result};
use crate::scalar::Real;

/// Which subspace of a factor is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Right singular vectors; used for `A`.
    RowSpace,
    /// Left singular vectors; used for `B`.
    ColumnSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis<T: Real> {
    /// Orthonormal columns spanning the subspace.
    pub basis: DMatrix<T>,
    pub side: Side,
}

impl<T: Real> SubspaceBasis<T> {
    /// Number of singular values above the relative cutoff.
    pub fn effective_rank(&self) -> usize {
        self.basis.ncols()
    }
}

/// SVD basis of `m`'s row or column space, dropping singular values below
/// `T::RANK_TOL` times the largest one.
pub fn orthonormal_basis<T: Real>(m: &DMatrix<T>, side: Side) -> Result<SubspaceBasis<T>> {
    if m.is_empty() || m.iter().all(|&v| v == T::zero()) {
        return Err(Error::ZeroMatrix);
    }
    let svd = m.clone().svd(side == Side::ColumnSpace, side == Side::RowSpace);
    let top = svd.singular_values.max();
    let cutoff = top * T::of(T::RANK_TOL);
    let keep: Vec<usize> =
        svd.singular_values.iter().enumerate().filter(|(_, &s)| s > cutoff).map(|(i, _)| i).collect();
    let basis = match side {
        Side::ColumnSpace => {
            let u = svd.u.expect("left singular vectors requested");
            u.select_columns(keep.iter())
        }
        Side::RowSpace => {
            let v_t = svd.v_t.expect("right singular vectors requested");
            v_t.select_rows(keep.iter()).transpose()
        }
    };
    Ok(SubspaceBasis { basis, side })
}

/// `‖U_Yᵀ U_X‖²_F / min(r_X, r_Y)` over effective ranks.
pub fn cca_similarity<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>, side: Side) -> Result<T> {
    let ambient = |m: &DMatrix<T>| match side {
        Side::ColumnSpace => m.nrows(),
        Side::RowSpace => m.ncols(),
    };
    ensure_dims(ambient(x) == ambient(y), || {
        format!("cannot compare {:?} with {:?} on {side:?}", x.shape(), y.shape())
    })?;
    let bx = orthonormal_basis(x, side)?;
    let by = orthonormal_basis(y, side)?;
    Ok(basis_similarity(&bx, &by))
}

/// Similarity of two precomputed bases.
pub fn basis_similarity<T: Real>(bx: &SubspaceBasis<T>, by: &SubspaceBasis<T>) -> T {
    let overlap = by.basis.transpose() * &bx.basis;
    let denom = bx.effective_rank().min(by.effective_rank());
    overlap.norm_squared() / T::of_usize(denom)
}
