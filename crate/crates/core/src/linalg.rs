//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn trace<T: Real>(m: &DMatrix<T>) -> T {
    m.diagonal().iter().fold(T::zero(), |acc, &x| acc + x)
}

/// `Tr[a · b]` without forming the product.
pub fn trace_of_product<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = T::zero();
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn frobenius_sq<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

pub fn asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    (m - m.transpose()).norm()
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn symmetric_eigen_range<T: Real>(m: &DMatrix<T>) -> (T, T) {
    let eig = m.clone().symmetric_eigen();
    let mut lo = eig.eigenvalues[0];
    let mut hi = lo;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// 2-norm condition number of a square matrix (`inf` when singular).
pub fn condition_number<T: Real>(m: &DMatrix<T>) -> f64 {
    let sv = m.singular_values();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &s in sv.iter() {
        let s = s.to_f64_lossy();
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solves `m · x = rhs` for symmetric positive definite `m`.
///
/// Refuses when the condition number exceeds `T::MAX_CONDITION`, unless
/// `ridge` is set, in which case `1e-10 · Tr(m)/k · I` is added first.
pub fn spd_solve<T: Real>(m: &DMatrix<T>, rhs: &DMatrix<T>, what: &'static str, ridge: bool) -> Result<DMatrix<T>> {
    let k = m.nrows();
    let (lo, hi) = symmetric_eigen_range(m);
    let (lo, hi) = (lo.to_f64_lossy(), hi.to_f64_lossy());
    let condition = if lo <= 0.0 { f64::INFINITY } else { hi / lo };
    let mut system = m.clone();
    if !(condition <= T::MAX_CONDITION) {
        if !ridge {
            return Err(Error::Singular { what, condition });
        }
        let mean = trace(m) / T::of_usize(k);
        let scale = if mean > T::zero() { mean } else { T::one() };
        let shift = T::of(1e-10) * scale;
        for i in 0..k {
            system[(i, i)] += shift;
        }
    }
    let chol = system.cholesky().ok_or(Error::Singular { what, condition })?;
    Ok(chol.solve(rhs))
}

/// `L` with `L Lᵀ = m` for symmetric positive semidefinite `m`.
///
/// Built from the eigendecomposition so rank-deficient covariances work;
/// eigenvalues below zero (round-off) are clamped.
pub fn psd_factor<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let eig = m.clone().symmetric_eigen();
    let mut v = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(T::zero()).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    v
}

/// `‖m mᵀ − I‖_F` (rows) or `‖mᵀ m − I‖_F` (columns).
pub fn orthonormality_residual<T: Real>(m: &DMatrix<T>, rows: bool) -> T {
    let gram = if rows { m * m.transpose() } else { m.transpose() * m };
    let k = gram.nrows();
    (gram - DMatrix::identity(k, k)).norm()
}
