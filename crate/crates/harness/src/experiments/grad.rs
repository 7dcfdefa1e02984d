use asymlora_core::glm::{grad_a_frozen_b, grad_b_frozen_a, grad_w, loss, GlmLoss, LabeledBatch};
use asymlora_core::rng::{child_seed, gaussian_matrix, substream};
use asymlora_core::stiefel::sample_stiefel_with;
use asymlora_core::{Matrix, Orientation};
use rand::Rng;

use super::par_trials;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::record::TrialRecord;

pub const FD_STEP: f64 = 1e-5;

/// Central-difference gradient of `f` at `x`.
pub fn finite_difference(x: &Matrix, f: impl Fn(&Matrix) -> Result<f64>) -> Result<Matrix> {
    let mut g = Matrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let mut up = x.clone();
            up[(i, j)] += FD_STEP;
            let mut down = x.clone();
            down[(i, j)] -= FD_STEP;
            g[(i, j)] = (f(&up)? - f(&down)?) / (2.0 * FD_STEP);
        }
    }
    Ok(g)
}

/// `max |a − n| / max |n|`.
pub fn relative_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    (analytic - numeric).amax() / numeric.amax().max(f64::MIN_POSITIVE)
}

/// Analytic gradients against finite differences. Even trials use the
/// logistic loss, odd trials least squares.
pub fn run_grad_check(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let (d_in, d_out) = config.dims[0];
    let r = config.ranks[0].min(d_in.min(d_out));
    let n = config.train_size;
    let hash = config.hash();
    par_trials(config.trials, |t| {
        let seed = child_seed(config.seed, t as u64);
        let mut rng = substream(seed, 0);
        let logistic = t % 2 == 0;
        let (name, glm) =
            if logistic { ("logistic", GlmLoss::logistic()) } else { ("least-squares", GlmLoss::least_squares()) };
        let x = gaussian_matrix(&mut rng, n, d_in, 1.0);
        let batch = if logistic {
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..d_out)).collect();
            LabeledBatch::classification(x, &labels, d_out)?
        } else {
            LabeledBatch::new(x, gaussian_matrix(&mut rng, n, d_out, 1.0))?
        };
        let w0 = gaussian_matrix(&mut rng, d_out, d_in, 0.3);
        let q = sample_stiefel_with(r, d_in, Orientation::RowOrthonormal, &mut rng)?;
        let u = sample_stiefel_with(d_out, r, Orientation::ColumnOrthonormal, &mut rng)?;
        let b = gaussian_matrix(&mut rng, d_out, r, 0.3);
        let a = gaussian_matrix(&mut rng, r, d_in, 0.3);
        let value = |w: &Matrix| Ok(loss(w, &batch, &glm)?);

        let g = grad_w(&w0, &batch, &glm)?;
        let fd = finite_difference(&w0, value)?;

        let w_b = &w0 + &b * q.matrix();
        let gb = grad_b_frozen_a(&b, &q, &w0, &batch, &glm)?;
        let fd_b = finite_difference(&b, |b| value(&(&w0 + b * q.matrix())))?;
        let chain_b = grad_w(&w_b, &batch, &glm)? * q.matrix().transpose();

        let w_a = &w0 + u.matrix() * &a;
        let ga = grad_a_frozen_b(&a, &u, &w0, &batch, &glm)?;
        let fd_a = finite_difference(&a, |a| value(&(&w0 + u.matrix() * a)))?;
        let chain_a = u.matrix().transpose() * grad_w(&w_a, &batch, &glm)?;

        Ok(TrialRecord::new("grad-check", name, &hash, seed, d_in, d_out, r)
            .with("fd_rel_err_w", relative_error(&g, &fd))
            .with("fd_rel_err_b", relative_error(&gb, &fd_b))
            .with("fd_rel_err_a", relative_error(&ga, &fd_a))
            .with("chain_err_b", (&gb - chain_b).amax())
            .with("chain_err_a", (&ga - chain_a).amax()))
    })
}
