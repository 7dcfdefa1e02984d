//! Least-squares adaptation with one factor frozen.
//!
//! The model is `Y = (W₀ + Δ) X + b + n` with `E[X] = 0`, `Cov[X] = Σ` and
//! isotropic noise `n ~ N(0, σ² I)`. The adapted predictor is
//! `ŷ = (W₀ + B A) X + b`, with the bias already matched to the target, so
//! the expected loss is `d_out σ² + Tr[(Δ − BA) Σ (Δ − BA)ᵀ]`. Scale is
//! `α / r = 1` throughout this module.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rayon::prelude::*;

use crate::error::{ensure_dims, Error, Result};
use crate::linalg::{asymmetry, frobenius_sq, psd_factor, spd_solve, symmetric_eigen_range, trace_of_product};
use crate::rng::{gaussian_matrix, substream};
use crate::scalar::Real;
use crate::stiefel::{sample_stiefel_with, Orientation, OrthonormalFrame};

/// Samples per Monte Carlo chunk; each chunk owns one random stream.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFineTuneTask<T: Real> {
    w0: DMatrix<T>,
    b0: DVector<T>,
    delta: DMatrix<T>,
    sigma: DMatrix<T>,
    noise_var: T,
}

impl<T: Real> LinearFineTuneTask<T> {
    pub fn new(w0: DMatrix<T>, b0: DVector<T>, delta: DMatrix<T>, sigma: DMatrix<T>, noise_var: T) -> Result<Self> {
        let (d_out, d_in) = w0.shape();
        ensure_dims(delta.shape() == (d_out, d_in), || format!("Δ is {:?}, W₀ is {:?}", delta.shape(), w0.shape()))?;
        ensure_dims(b0.len() == d_out, || format!("b₀ has {} entries, d_out = {d_out}", b0.len()))?;
        ensure_dims(sigma.shape() == (d_in, d_in), || format!("Σ is {:?}, expected {d_in}x{d_in}", sigma.shape()))?;
        if !(noise_var >= T::zero()) {
            return Err(Error::InvalidArgument(format!("noise variance {noise_var} < 0")));
        }
        let tol = T::of(T::ORTHO_TOL);
        if asymmetry(&sigma) >= tol {
            return Err(Error::InvalidArgument("Σ is not symmetric".into()));
        }
        let (lo, hi) = symmetric_eigen_range(&sigma);
        if lo < -tol * hi.max(T::one()) {
            return Err(Error::InvalidArgument(format!("Σ is not positive semidefinite (min eigenvalue {lo:e})")));
        }
        Ok(Self { w0, b0, delta, sigma, noise_var })
    }

    /// Task with zero pretrained weights and bias.
    pub fn from_shift(delta: DMatrix<T>, sigma: DMatrix<T>, noise_var: T) -> Result<Self> {
        let (d_out, d_in) = delta.shape();
        Self::new(DMatrix::zeros(d_out, d_in), DVector::zeros(d_out), delta, sigma, noise_var)
    }

    pub fn d_in(&self) -> usize {
        self.w0.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.w0.nrows()
    }

    pub fn w0(&self) -> &DMatrix<T> {
        &self.w0
    }

    pub fn b0(&self) -> &DVector<T> {
        &self.b0
    }

    pub fn delta(&self) -> &DMatrix<T> {
        &self.delta
    }

    pub fn sigma(&self) -> &DMatrix<T> {
        &self.sigma
    }

    pub fn noise_var(&self) -> T {
        self.noise_var
    }

    pub fn w_targ(&self) -> DMatrix<T> {
        &self.w0 + &self.delta
    }

    /// `d_out σ²`, the loss floor.
    pub fn noise_floor(&self) -> T {
        T::of_usize(self.d_out()) * self.noise_var
    }

    /// `Tr[Δ Σ Δᵀ]`, the loss of leaving the model unadapted minus the floor.
    pub fn shift_energy(&self) -> T {
        trace_of_product(&(&self.delta * &self.sigma), &self.delta.transpose())
    }

    /// Same task with a different input covariance.
    pub fn with_sigma(&self, sigma: DMatrix<T>) -> Result<Self> {
        Self::new(self.w0.clone(), self.b0.clone(), self.delta.clone(), sigma, self.noise_var)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveOptions {
    /// Regularize an ill-conditioned `Q Σ Qᵀ` instead of failing.
    pub ridge_fallback: bool,
}

fn check_q<T: Real>(q: &OrthonormalFrame<T>, d_in: usize) -> Result<()> {
    ensure_dims(q.orientation() == Orientation::RowOrthonormal && q.ambient_dim() == d_in, || {
        format!("frozen A must be row-orthonormal r x {d_in}")
    })
}

fn check_u<T: Real>(u: &OrthonormalFrame<T>, d_out: usize) -> Result<()> {
    ensure_dims(u.orientation() == Orientation::ColumnOrthonormal && u.ambient_dim() == d_out, || {
        format!("frozen B must be column-orthonormal {d_out} x r")
    })
}

/// `B* = Δ Σ Qᵀ (Q Σ Qᵀ)⁻¹`.
pub fn solve_freeze_a<T: Real>(task: &LinearFineTuneTask<T>, q: &OrthonormalFrame<T>) -> Result<DMatrix<T>> {
    solve_freeze_a_with(task, q, SolveOptions::default())
}

pub fn solve_freeze_a_with<T: Real>(
    task: &LinearFineTuneTask<T>,
    q: &OrthonormalFrame<T>,
    opts: SolveOptions,
) -> Result<DMatrix<T>> {
    check_q(q, task.d_in())?;
    let q = q.matrix();
    let q_sigma = q * &task.sigma;
    let gram = &q_sigma * q.transpose();
    // (QΣQᵀ) B*ᵀ = Q Σ Δᵀ
    let rhs = &q_sigma * task.delta.transpose();
    let bt = spd_solve(&gram, &rhs, "Q Σ Qᵀ", opts.ridge_fallback)?;
    Ok(bt.transpose())
}

/// `A* = Uᵀ Δ`; independent of Σ.
pub fn solve_freeze_b<T: Real>(task: &LinearFineTuneTask<T>, u: &OrthonormalFrame<T>) -> Result<DMatrix<T>> {
    check_u(u, task.d_out())?;
    Ok(u.matrix().transpose() * &task.delta)
}

/// `d_out σ² + Tr[(Δ − BA) Σ (Δ − BA)ᵀ]` for arbitrary factors.
pub fn expected_loss<T: Real>(task: &LinearFineTuneTask<T>, b: &DMatrix<T>, a: &DMatrix<T>) -> Result<T> {
    ensure_dims(b.nrows() == task.d_out() && a.ncols() == task.d_in() && b.ncols() == a.nrows(), || {
        format!("B {:?} · A {:?} does not match Δ {:?}", b.shape(), a.shape(), task.delta.shape())
    })?;
    let resid = &task.delta - b * a;
    Ok(task.noise_floor() + trace_of_product(&(&resid * &task.sigma), &resid.transpose()))
}

/// `d_out σ² + Tr[ΔΣΔᵀ] − Tr[QΣΔᵀΔΣQᵀ (QΣQᵀ)⁻¹]`.
pub fn expected_loss_freeze_a<T: Real>(task: &LinearFineTuneTask<T>, q: &OrthonormalFrame<T>) -> Result<T> {
    expected_loss_freeze_a_with(task, q, SolveOptions::default())
}

pub fn expected_loss_freeze_a_with<T: Real>(
    task: &LinearFineTuneTask<T>,
    q: &OrthonormalFrame<T>,
    opts: SolveOptions,
) -> Result<T> {
    check_q(q, task.d_in())?;
    let q = q.matrix();
    let q_sigma = q * &task.sigma;
    let gram = &q_sigma * q.transpose();
    let p = &q_sigma * task.delta.transpose(); // Q Σ Δᵀ, r × d_out
    let solved = spd_solve(&gram, &p, "Q Σ Qᵀ", opts.ridge_fallback)?;
    // Tr[P Pᵀ G⁻¹] = Tr[Pᵀ G⁻¹ P]
    let explained = trace_of_product(&p.transpose(), &solved);
    Ok(task.noise_floor() + task.shift_energy() - explained)
}

/// `d_out σ² + Tr[ΔΣΔᵀ] − Tr[Uᵀ Δ Σ Δᵀ U]`.
pub fn expected_loss_freeze_b<T: Real>(task: &LinearFineTuneTask<T>, u: &OrthonormalFrame<T>) -> Result<T> {
    check_u(u, task.d_out())?;
    let ud = u.matrix().transpose() * &task.delta;
    let explained = trace_of_product(&(&ud * &task.sigma), &ud.transpose());
    Ok(task.noise_floor() + task.shift_energy() - explained)
}

/// Monte Carlo estimate of the loss of `(B, A)`.
///
/// Draws `X ~ N(0, Σ)` and `n ~ N(0, σ² I)`, forms the targets explicitly and
/// averages `‖Y − (W₀ + BA) X − b‖²`. Samples are split into chunks of
/// 4096, chunk `c` drawing from stream `(seed, c)`; chunk sums are reduced in
/// chunk order so the result does not depend on the thread count.
pub fn empirical_loss<T: Real>(
    task: &LinearFineTuneTask<T>,
    b: &DMatrix<T>,
    a: &DMatrix<T>,
    n_samples: usize,
    seed: u64,
) -> Result<T> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    ensure_dims(b.nrows() == task.d_out() && a.ncols() == task.d_in() && b.ncols() == a.nrows(), || {
        format!("B {:?} · A {:?} does not match Δ {:?}", b.shape(), a.shape(), task.delta.shape())
    })?;
    let factor = psd_factor(&task.sigma);
    let w_targ = task.w_targ();
    let w_fit = &task.w0 + b * a;
    let noise_std = task.noise_var.sqrt();
    let chunks = n_samples.div_ceil(CHUNK);

    let sums: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let m = CHUNK.min(n_samples - c * CHUNK);
            let mut rng = substream(seed, c as u64);
            chunk_sq_error(task, &factor, &w_targ, &w_fit, noise_std, m, &mut rng)
        })
        .collect();
    let total = sums.into_iter().fold(T::zero(), |acc, s| acc + s);
    Ok(total / T::of_usize(n_samples))
}

fn chunk_sq_error<T: Real, R: RngCore>(
    task: &LinearFineTuneTask<T>,
    factor: &DMatrix<T>,
    w_targ: &DMatrix<T>,
    w_fit: &DMatrix<T>,
    noise_std: T,
    m: usize,
    rng: &mut R,
) -> T {
    let z = gaussian_matrix::<T, R>(rng, task.d_in(), m, T::one());
    let noise = gaussian_matrix::<T, R>(rng, task.d_out(), m, noise_std);
    let x = factor * z;
    let mut y = w_targ * &x + noise;
    let mut pred = w_fit * &x;
    for mut col in y.column_iter_mut() {
        col += &task.b0;
    }
    for mut col in pred.column_iter_mut() {
        col += &task.b0;
    }
    frobenius_sq(&(y - pred))
}

/// Outcome of one draw of frozen frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymmetryRecord<T> {
    /// `L(Q, B*)`: A frozen, B optimal.
    pub loss_freeze_a: T,
    /// `L(A*, U)`: B frozen, A optimal.
    pub loss_freeze_b: T,
    /// `loss_freeze_b − loss_freeze_a`.
    pub gap: T,
}

/// Draws `Q` then `U` of rank `rank` from stream `(seed, 0)` and compares the
/// two optimal frozen-factor losses.
pub fn asymmetry_trial<T: Real>(task: &LinearFineTuneTask<T>, rank: usize, seed: u64) -> Result<AsymmetryRecord<T>> {
    let mut rng = substream(seed, 0);
    let q = sample_stiefel_with::<T, _>(rank, task.d_in(), Orientation::RowOrthonormal, &mut rng)?;
    let u = sample_stiefel_with::<T, _>(task.d_out(), rank, Orientation::ColumnOrthonormal, &mut rng)?;
    let loss_freeze_a = expected_loss_freeze_a(task, &q)?;
    let loss_freeze_b = expected_loss_freeze_b(task, &u)?;
    Ok(AsymmetryRecord { loss_freeze_a, loss_freeze_b, gap: loss_freeze_b - loss_freeze_a })
}

/// `Tr[ΣQᵀ(QΣQᵀ)⁻¹QΣΔᵀΔ] − Tr[QᵀQ ΣQᵀ(QΣQᵀ)⁻¹QΣΔᵀΔ]`.
///
/// Zero when `Σ = I` or `Q` is square. Not sign-definite in general: with a
/// low-rank `Δ` and a correlated `Σ` it can be negative.
pub fn trace_inequality_residual<T: Real>(
    sigma: &DMatrix<T>,
    delta: &DMatrix<T>,
    q: &OrthonormalFrame<T>,
) -> Result<T> {
    let d_in = sigma.nrows();
    ensure_dims(sigma.is_square() && delta.ncols() == d_in, || {
        format!("Σ {:?} and Δ {:?} do not conform", sigma.shape(), delta.shape())
    })?;
    check_q(q, d_in)?;
    let q = q.matrix();
    let q_sigma = q * sigma;
    let gram = &q_sigma * q.transpose();
    // K = ΣQᵀ (QΣQᵀ)⁻¹ QΣ
    let k = q_sigma.transpose() * spd_solve(&gram, &q_sigma, "Q Σ Qᵀ", false)?;
    let kg = k * (delta.transpose() * delta);
    let lhs = kg.trace();
    let rhs = trace_of_product(&(q.transpose() * q), &kg);
    Ok(lhs - rhs)
}

/// `B* A* F (Q F)⁻¹`: the frozen-A adapter equivalent to `(B*, A*)` on
/// inputs in the column space of `F` (`Σ = F Fᵀ`).
pub fn lowrank_sigma_equivalent_b<T: Real>(
    b_star: &DMatrix<T>,
    a_star: &DMatrix<T>,
    f: &DMatrix<T>,
    q: &OrthonormalFrame<T>,
) -> Result<DMatrix<T>> {
    ensure_dims(b_star.ncols() == a_star.nrows() && a_star.ncols() == f.nrows(), || {
        format!("B* {:?}, A* {:?}, F {:?} do not conform", b_star.shape(), a_star.shape(), f.shape())
    })?;
    check_q(q, f.nrows())?;
    let qf = q.matrix() * f;
    ensure_dims(qf.is_square(), || format!("QF is {:?}, must be square", qf.shape()))?;
    let condition = crate::linalg::condition_number(&qf);
    if !(condition <= T::MAX_CONDITION) {
        return Err(Error::Singular { what: "Q F", condition });
    }
    let inv = qf.try_inverse().ok_or(Error::Singular { what: "Q F", condition })?;
    Ok(b_star * a_star * f * inv)
}

/// `variance · (1 − r/d) · Tr[U_X U_Xᵀ Δᵀ Δ]`.
pub fn asymptotic_gap<T: Real>(
    u_x: &OrthonormalFrame<T>,
    delta: &DMatrix<T>,
    r: usize,
    d: usize,
    variance: T,
) -> Result<T> {
    ensure_dims(r <= d && d >= 1, || format!("rank {r} exceeds dimension {d}"))?;
    ensure_dims(u_x.orientation() == Orientation::ColumnOrthonormal && u_x.ambient_dim() == delta.ncols(), || {
        format!("U_X must be column-orthonormal with {} rows", delta.ncols())
    })?;
    let energy = frobenius_sq(&(delta * u_x.matrix()));
    Ok(variance * (T::one() - T::of_usize(r) / T::of_usize(d)) * energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::stiefel::{random_low_rank, sample_stiefel};

    fn pd_sigma(d: usize, seed: u64) -> DMatrix<f64> {
        let g = gaussian_matrix::<f64, _>(&mut substream(seed, 9), d, d, 1.0);
        &g * g.transpose() / d as f64 + DMatrix::identity(d, d) * 0.5
    }

    fn task(d: usize, seed: u64) -> LinearFineTuneTask<f64> {
        let mut rng = substream(seed, 1);
        let w0 = gaussian_matrix::<f64, _>(&mut rng, d, d, 1.0);
        let b0 = crate::rng::gaussian_vector::<f64, _>(&mut rng, d, 1.0);
        let delta = random_low_rank(d, d, d.min(3), 2.0, seed).unwrap();
        LinearFineTuneTask::new(w0, b0, delta, pd_sigma(d, seed), 0.25).unwrap()
    }

    #[test]
    fn full_rank_identity_frame_recovers_delta() {
        let t = task(6, 1);
        let q = OrthonormalFrame::identity(6, Orientation::RowOrthonormal);
        let b = solve_freeze_a(&t, &q).unwrap();
        assert!((b - t.delta()).amax() < 1e-10);
        let loss = expected_loss_freeze_a(&t, &q).unwrap();
        assert!((loss - t.noise_floor()).abs() < 1e-10);

        let u = OrthonormalFrame::identity(6, Orientation::ColumnOrthonormal);
        assert_eq!(solve_freeze_b(&t, &u).unwrap(), t.delta().clone());
        assert!((expected_loss_freeze_b(&t, &u).unwrap() - t.noise_floor()).abs() < 1e-10);
    }

    #[test]
    fn zero_shift_gives_zero_solutions() {
        let t = LinearFineTuneTask::from_shift(DMatrix::zeros(5, 4), pd_sigma(4, 2), 0.3).unwrap();
        let q = sample_stiefel::<f64>(2, 4, Orientation::RowOrthonormal, 3).unwrap();
        let u = sample_stiefel::<f64>(5, 2, Orientation::ColumnOrthonormal, 3).unwrap();
        assert_eq!(solve_freeze_a(&t, &q).unwrap().amax(), 0.0);
        assert_eq!(solve_freeze_b(&t, &u).unwrap().amax(), 0.0);
        assert!((expected_loss_freeze_a(&t, &q).unwrap() - 1.5).abs() < 1e-12);
        assert!((expected_loss_freeze_b(&t, &u).unwrap() - 1.5).abs() < 1e-12);
        let rec = asymmetry_trial(&t, 2, 4).unwrap();
        assert_eq!(rec.gap, 0.0);
    }

    #[test]
    fn closed_form_losses_agree_with_general_loss() {
        let t = task(8, 3);
        let q = sample_stiefel::<f64>(2, 8, Orientation::RowOrthonormal, 5).unwrap();
        let u = sample_stiefel::<f64>(8, 2, Orientation::ColumnOrthonormal, 6).unwrap();
        let b = solve_freeze_a(&t, &q).unwrap();
        let a = solve_freeze_b(&t, &u).unwrap();
        let la = expected_loss_freeze_a(&t, &q).unwrap();
        let lb = expected_loss_freeze_b(&t, &u).unwrap();
        assert!((la - expected_loss(&t, &b, q.matrix()).unwrap()).abs() < 1e-10);
        assert!((lb - expected_loss(&t, u.matrix(), &a).unwrap()).abs() < 1e-10);
        for l in [la, lb] {
            assert!(l >= t.noise_floor() - 1e-9);
            assert!(l <= t.noise_floor() + t.shift_energy() + 1e-9);
        }
    }

    #[test]
    fn freeze_b_solution_ignores_sigma() {
        let t = task(6, 4);
        let other = t.with_sigma(pd_sigma(6, 77)).unwrap();
        let u = sample_stiefel::<f64>(6, 2, Orientation::ColumnOrthonormal, 8).unwrap();
        assert_eq!(solve_freeze_b(&t, &u).unwrap(), solve_freeze_b(&other, &u).unwrap());
    }

    #[test]
    fn singular_projection_is_refused_unless_ridged() {
        // Σ supported on the first coordinate, Q looks at the second.
        let mut sigma = DMatrix::zeros(3, 3);
        sigma[(0, 0)] = 1.0;
        let t = LinearFineTuneTask::from_shift(DMatrix::identity(3, 3), sigma, 0.0).unwrap();
        let q = OrthonormalFrame::new(DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]), Orientation::RowOrthonormal)
            .unwrap();
        assert!(matches!(solve_freeze_a(&t, &q), Err(Error::Singular { .. })));
        let b = solve_freeze_a_with(&t, &q, SolveOptions { ridge_fallback: true }).unwrap();
        assert!(b.iter().all(|x| f64::is_finite(*x)));
    }

    #[test]
    fn task_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(LinearFineTuneTask::from_shift(DMatrix::zeros(2, 2), bad, 0.0).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(LinearFineTuneTask::from_shift(DMatrix::zeros(2, 2), indefinite, 0.0).is_err());
        assert!(LinearFineTuneTask::from_shift(DMatrix::zeros(2, 2), DMatrix::identity(2, 2), -1.0).is_err());
        assert!(matches!(
            LinearFineTuneTask::from_shift(DMatrix::zeros(2, 3), DMatrix::identity(2, 2), 0.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn wrong_frame_orientation_is_rejected() {
        let t = task(4, 5);
        let u = sample_stiefel::<f64>(4, 2, Orientation::ColumnOrthonormal, 1).unwrap();
        assert!(matches!(solve_freeze_a(&t, &u), Err(Error::Dimension(_))));
        assert!(matches!(solve_freeze_b(&t, &u.transposed()), Err(Error::Dimension(_))));
    }

    #[test]
    fn empirical_loss_noise_only_cases() {
        let sigma = pd_sigma(4, 6);
        let delta = random_low_rank(3, 4, 2, 1.5, 6).unwrap();
        let t = LinearFineTuneTask::from_shift(DMatrix::zeros(3, 4), sigma.clone(), 0.5).unwrap();
        // Pure noise: ‖n‖² has mean d_out σ² = 1.5 and variance 2 d_out σ⁴ = 1.5.
        let n = 40_000;
        let se = (1.5f64 / n as f64).sqrt();
        let est = empirical_loss(&t, &DMatrix::zeros(3, 1), &DMatrix::zeros(1, 4), n, 1).unwrap();
        assert!((est - 1.5).abs() < 3.0 * se, "{est}");

        // Perfect fit: BA = Δ.
        let t = LinearFineTuneTask::from_shift(delta.clone(), sigma, 0.5).unwrap();
        let est = empirical_loss(&t, &delta, &DMatrix::identity(4, 4), n, 2).unwrap();
        assert!((est - 1.5).abs() < 3.0 * se, "{est}");
    }

    #[test]
    fn empirical_loss_rejects_bad_input() {
        let t = task(4, 7);
        assert!(empirical_loss(&t, &DMatrix::zeros(4, 1), &DMatrix::zeros(1, 4), 0, 1).is_err());
        assert!(matches!(
            empirical_loss(&t, &DMatrix::zeros(4, 2), &DMatrix::zeros(1, 4), 10, 1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn empirical_loss_is_deterministic() {
        let t = task(4, 8);
        let b = DMatrix::from_element(4, 1, 0.1);
        let a = DMatrix::from_element(1, 4, 0.2);
        let x = empirical_loss(&t, &b, &a, 10_000, 3).unwrap();
        let y = empirical_loss(&t, &b, &a, 10_000, 3).unwrap();
        assert_eq!(x.to_bits(), y.to_bits());
    }

    #[test]
    fn square_frames_close_the_gap() {
        let t = task(5, 9);
        let rec = asymmetry_trial(&t, 5, 1).unwrap();
        assert!(rec.gap.abs() < 1e-8);
    }

    #[test]
    fn trace_residual_vanishes_for_square_frame_and_identity_sigma() {
        let sigma = pd_sigma(6, 10);
        let delta = random_low_rank(4, 6, 3, 1.0, 10).unwrap();
        let q = sample_stiefel::<f64>(6, 6, Orientation::RowOrthonormal, 10).unwrap();
        assert!(trace_inequality_residual(&sigma, &delta, &q).unwrap().abs() < 1e-9);
        let q = sample_stiefel::<f64>(2, 6, Orientation::RowOrthonormal, 11).unwrap();
        let res = trace_inequality_residual(&DMatrix::identity(6, 6), &delta, &q).unwrap();
        assert!(res >= -1e-9);
        assert!(res.abs() < 1e-12);
    }

    #[test]
    fn trace_residual_can_be_negative() {
        // Σ = [[2, -1], [-1, 1]], Q = [1, 0], Δ = [2, 1]:
        // ΣQᵀ(QΣQᵀ)⁻¹QΣ = [[2, -1], [-1, 0.5]], ΔᵀΔ = [[4, 2], [2, 1]],
        // so the left trace is 4.5 and the right trace is 6.
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]);
        let delta = DMatrix::from_row_slice(1, 2, &[2.0, 1.0]);
        let q = OrthonormalFrame::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), Orientation::RowOrthonormal).unwrap();
        let res: f64 = trace_inequality_residual(&sigma, &delta, &q).unwrap();
        assert!((res + 1.5).abs() < 1e-12, "{res}");
    }

    #[test]
    fn equivalent_b_with_aligned_frame() {
        // Q = [I 0] and F = [I; G] gives QF = I.
        let (d, r) = (5, 2);
        let mut f = gaussian_matrix::<f64, _>(&mut substream(12, 0), d, r, 1.0);
        f.view_mut((0, 0), (r, r)).copy_from(&DMatrix::identity(r, r));
        let q = OrthonormalFrame::new(DMatrix::identity(d, d).rows(0, r).into_owned(), Orientation::RowOrthonormal)
            .unwrap();
        let b_star = gaussian_matrix::<f64, _>(&mut substream(12, 1), 3, r, 1.0);
        let a_star = gaussian_matrix::<f64, _>(&mut substream(12, 2), r, d, 1.0);
        let b_eq = lowrank_sigma_equivalent_b(&b_star, &a_star, &f, &q).unwrap();
        assert!((b_eq - &b_star * &a_star * &f).amax() < 1e-12);
        let zero = lowrank_sigma_equivalent_b(&b_star, &DMatrix::zeros(r, d), &f, &q).unwrap();
        assert_eq!(zero.amax(), 0.0);
    }

    #[test]
    fn equivalent_b_reports_singular_qf() {
        let f = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let q = OrthonormalFrame::new(DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]), Orientation::RowOrthonormal)
            .unwrap();
        let err = lowrank_sigma_equivalent_b(&DMatrix::identity(2, 1), &DMatrix::zeros(1, 3), &f, &q).unwrap_err();
        assert!(matches!(err, Error::Singular { what: "Q F", .. }));
    }

    #[test]
    fn asymptotic_gap_edge_cases() {
        let ux = sample_stiefel::<f64>(6, 2, Orientation::ColumnOrthonormal, 1).unwrap();
        let delta = random_low_rank(4, 6, 2, 1.0, 2).unwrap();
        assert_eq!(asymptotic_gap(&ux, &delta, 6, 6, 1.0).unwrap(), 0.0);
        assert_eq!(asymptotic_gap(&ux, &DMatrix::zeros(4, 6), 2, 6, 1.0).unwrap(), 0.0);
        assert!(asymptotic_gap(&ux, &delta, 2, 6, 1.0).unwrap() > 0.0);
        assert!(asymptotic_gap(&ux, &delta, 7, 6, 1.0).is_err());
    }
}
