//! Asymmetric low-rank adapters: closed forms, gradients, bounds and
//! subspace similarity.
//!
//! A low-rank adapter updates a weight matrix as `W₀ + B A`. This crate
//! collects the pieces needed to study what happens when one of the two
//! factors is frozen at a random orthonormal frame:
//!
//! * [`stiefel`]: Haar sampling of frozen frames and random low-rank shifts.
//! * [`lsq`]: closed-form optimal factors and expected losses for linear
//!   least squares, plus a Monte Carlo oracle.
//! * [`glm`]: generalized output losses, full and frozen-factor gradients,
//!   and a deterministic gradient-descent trainer.
//! * [`bound`]: information-theoretic generalization bounds and rank matching.
//! * [`similarity`]: CCA goodness-of-fit between adapter subspaces.
//!
//! Numerical code is generic over [`Real`] (`f32`, `f64`); the aliases below
//! fix the double-precision types used by the experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod adapter;
pub mod bound;
pub mod error;
pub mod glm;
pub mod linalg;
pub mod lsq;
pub mod rng;
pub mod scalar;
pub mod similarity;
pub mod stiefel;

pub use adapter::{AdapterState, FreezeMode, InitScheme};
pub use error::{Error, Result};
pub use scalar::Real;
pub use stiefel::{Orientation, OrthonormalFrame};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
pub type Frame = OrthonormalFrame<f64>;
pub type Task = lsq::LinearFineTuneTask<f64>;
pub type Adapter = AdapterState<f64>;
pub type Batch = glm::LabeledBatch<f64>;
pub type Loss = glm::GlmLoss<f64>;

pub type Matrix32 = nalgebra::DMatrix<f32>;
pub type Frame32 = OrthonormalFrame<f32>;
pub type Task32 = lsq::LinearFineTuneTask<f32>;
