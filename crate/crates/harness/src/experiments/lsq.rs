use asymlora_core::lsq::{
    empirical_loss, expected_loss, expected_loss_freeze_a, expected_loss_freeze_b, solve_freeze_a, solve_freeze_b,
    trace_inequality_residual, LinearFineTuneTask,
};
use asymlora_core::rng::{child_seed, gaussian_matrix, gaussian_vector, substream, StreamRng};
use asymlora_core::stiefel::sample_stiefel_with;
use asymlora_core::{Matrix, Orientation, Task};

use super::{cell_label, cells, par_trials};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::record::TrialRecord;

const DIRECTIONS: usize = 50;
const STEP: f64 = 1e-3;

/// Random positive definite covariance `G Gᵀ / d + 0.1 I`.
pub(crate) fn random_pd(rng: &mut StreamRng, d: usize) -> Matrix {
    let g = gaussian_matrix(rng, d, d, 1.0);
    &g * g.transpose() / d as f64 + Matrix::identity(d, d) * 0.1
}

/// A dense random task: Gaussian `W₀`, `b₀`, `Δ` and a random PD `Σ`.
pub(crate) fn random_task(rng: &mut StreamRng, d_in: usize, d_out: usize, noise_var: f64) -> Result<Task> {
    let std = 1.0 / (d_in as f64).sqrt();
    let w0 = gaussian_matrix(rng, d_out, d_in, std);
    let b0 = gaussian_vector(rng, d_out, 1.0);
    let delta = gaussian_matrix(rng, d_out, d_in, std);
    let sigma = random_pd(rng, d_in);
    Ok(LinearFineTuneTask::new(w0, b0, delta, sigma, noise_var)?)
}

/// Largest loss decrease over random unit-norm perturbations of size `STEP`.
fn worst_decrease(
    rng: &mut StreamRng,
    base: f64,
    point: &Matrix,
    loss: impl Fn(&Matrix) -> Result<f64>,
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..DIRECTIONS {
        let dir = gaussian_matrix(rng, point.nrows(), point.ncols(), 1.0);
        let moved = point + &dir * (STEP / dir.norm());
        worst = worst.max(base - loss(&moved)?);
    }
    Ok(worst)
}

/// Closed forms against Monte Carlo, first-order optimality, trace residual
/// and the low-rank-`Σ` equivalence, one random task per trial. Trials cycle
/// through the dims × ranks grid.
pub fn run_verify_lsq(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let grid = cells(config);
    let hash = config.hash();
    par_trials(config.trials, |t| {
        let (d_in, d_out, r) = grid[t % grid.len()];
        let seed = child_seed(config.seed, t as u64);
        let mut rng = substream(seed, 0);
        let task = random_task(&mut rng, d_in, d_out, config.noise_var)?;
        let mut frames = substream(seed, 1);
        let q = sample_stiefel_with(r, d_in, Orientation::RowOrthonormal, &mut frames)?;
        let u = sample_stiefel_with(d_out, r, Orientation::ColumnOrthonormal, &mut frames)?;

        let b_star = solve_freeze_a(&task, &q)?;
        let a_star = solve_freeze_b(&task, &u)?;
        let loss_a = expected_loss_freeze_a(&task, &q)?;
        let loss_b = expected_loss_freeze_b(&task, &u)?;
        let n = config.monte_carlo_samples;
        let mc_a = empirical_loss(&task, &b_star, q.matrix(), n, child_seed(seed, 2))?;
        let mc_b = empirical_loss(&task, u.matrix(), &a_star, n, child_seed(seed, 3))?;

        let mut dirs = substream(seed, 4);
        let opt_a = worst_decrease(&mut dirs, loss_a, &b_star, |b| Ok(expected_loss(&task, b, q.matrix())?))?;
        let opt_b = worst_decrease(&mut dirs, loss_b, &a_star, |a| Ok(expected_loss(&task, u.matrix(), a)?))?;
        let residual = trace_inequality_residual(task.sigma(), task.delta(), &q)?;

        // Σ = F Fᵀ of rank r: frozen A should reach the noise floor, as does
        // the unconstrained rank-r solution B = ΔF(FᵀF)⁻¹, A = Fᵀ.
        let f = gaussian_matrix(&mut substream(seed, 5), d_in, r, 1.0);
        let low = task.with_sigma(&f * f.transpose())?;
        let gram_inv = (f.transpose() * &f)
            .try_inverse()
            .ok_or(asymlora_core::Error::Singular { what: "Fᵀ F", condition: f64::INFINITY })?;
        let full = expected_loss(&low, &(task.delta() * &f * gram_inv), &f.transpose())?;
        let frozen = expected_loss_freeze_a(&low, &q)?;

        Ok(TrialRecord::new("verify-lsq", &cell_label(d_in, d_out, r), &hash, seed, d_in, d_out, r)
            .with("closed_form_loss_freeze_a", loss_a)
            .with("closed_form_loss_freeze_b", loss_b)
            .with("monte_carlo_loss_freeze_a", mc_a)
            .with("monte_carlo_loss_freeze_b", mc_b)
            .with("rel_err_freeze_a", (mc_a - loss_a).abs() / loss_a)
            .with("rel_err_freeze_b", (mc_b - loss_b).abs() / loss_b)
            .with("max_decrease_freeze_a", opt_a)
            .with("max_decrease_freeze_b", opt_b)
            .with("trace_residual", residual)
            .with("lowrank_full_loss", full)
            .with("lowrank_freeze_a_loss", frozen))
    })
}
