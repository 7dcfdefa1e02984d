//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the closed forms, samplers and gradient code.
///
/// Implemented for `f32` and `f64`. The associated constants carry the
/// precision-dependent thresholds; the `f64` values are the reference ones.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Allowed residual in orthonormality and symmetry checks.
    const ORTHO_TOL: f64;
    /// Relative cutoff below which singular values count as zero.
    const RANK_TOL: f64;
    /// Largest condition number accepted before a solve is refused.
    const MAX_CONDITION: f64;

    /// Lossy conversion from an `f64` literal or sample.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 converts to every Real")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count converts to every Real")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const ORTHO_TOL: f64 = 1e-10;
    const RANK_TOL: f64 = 1e-10;
    const MAX_CONDITION: f64 = 1e12;
}

impl Real for f32 {
    const ORTHO_TOL: f64 = 1e-4;
    const RANK_TOL: f64 = 1e-5;
    const MAX_CONDITION: f64 = 1e6;
}
