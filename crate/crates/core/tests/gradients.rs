use asymlora_core::glm::{
    grad_a_frozen_b, grad_b_frozen_a, grad_w, loss, softmax, Activation, GlmLoss, LabeledBatch, OutputMap, Potential,
};
use asymlora_core::rng::{gaussian_matrix, substream};
use asymlora_core::stiefel::sample_stiefel_with;
use asymlora_core::{Batch, Matrix, Orientation};
use rand::Rng;

const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-5;
const EXACT_TOL: f64 = 1e-12;

fn random_batch(seed: u64, n: usize, d_in: usize, k: usize, one_hot: bool) -> Batch {
    let mut rng = substream(seed, 1);
    let x = gaussian_matrix(&mut rng, n, d_in, 1.0);
    if one_hot {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        LabeledBatch::classification(x, &labels, k).unwrap()
    } else {
        LabeledBatch::new(x, gaussian_matrix(&mut rng, n, k, 1.0)).unwrap()
    }
}

/// Central differences of `f` at `x`, entry by entry.
fn numeric_grad(x: &Matrix, f: impl Fn(&Matrix) -> f64) -> Matrix {
    let mut g = Matrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let mut plus = x.clone();
            plus[(i, j)] += FD_STEP;
            let mut minus = x.clone();
            minus[(i, j)] -= FD_STEP;
            g[(i, j)] = (f(&plus) - f(&minus)) / (2.0 * FD_STEP);
        }
    }
    g
}

fn max_rel_err(analytic: &Matrix, numeric: &Matrix) -> f64 {
    let scale = numeric.amax().max(1e-8);
    (analytic - numeric).amax() / scale
}

fn families() -> Vec<(&'static str, GlmLoss<f64>, bool)> {
    vec![("logistic", GlmLoss::logistic(), true), ("least-squares", GlmLoss::least_squares(), false)]
}

#[test]
fn full_gradient_matches_finite_differences() {
    for (name, glm, one_hot) in families() {
        for seed in 0..20 {
            let batch = random_batch(seed, 8, 6, 4, one_hot);
            let w = gaussian_matrix(&mut substream(seed, 0), 4, 6, 0.5);
            let g = grad_w(&w, &batch, &glm).unwrap();
            let fd = numeric_grad(&w, |w| loss(w, &batch, &glm).unwrap());
            let err = max_rel_err(&g, &fd);
            assert!(err < FD_REL_TOL, "{name} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn frozen_a_gradient_matches_finite_differences() {
    for (name, glm, one_hot) in families() {
        for seed in 0..20 {
            let mut rng = substream(seed, 0);
            let batch = random_batch(seed, 10, 7, 5, one_hot);
            let w0 = gaussian_matrix(&mut rng, 5, 7, 0.3);
            let q = sample_stiefel_with(3, 7, Orientation::RowOrthonormal, &mut rng).unwrap();
            let b = gaussian_matrix(&mut rng, 5, 3, 0.3);
            let g = grad_b_frozen_a(&b, &q, &w0, &batch, &glm).unwrap();
            let fd = numeric_grad(&b, |b| loss(&(&w0 + b * q.matrix()), &batch, &glm).unwrap());
            let err = max_rel_err(&g, &fd);
            assert!(err < FD_REL_TOL, "{name} seed {seed}: {err:e}");

            let chain = grad_w(&(&w0 + &b * q.matrix()), &batch, &glm).unwrap() * q.matrix().transpose();
            assert!((g - chain).amax() < EXACT_TOL);
        }
    }
}

#[test]
fn frozen_b_gradient_matches_finite_differences() {
    for (name, glm, one_hot) in families() {
        for seed in 0..20 {
            let mut rng = substream(seed, 0);
            let batch = random_batch(seed, 10, 7, 5, one_hot);
            let w0 = gaussian_matrix(&mut rng, 5, 7, 0.3);
            let u = sample_stiefel_with(5, 2, Orientation::ColumnOrthonormal, &mut rng).unwrap();
            let a = gaussian_matrix(&mut rng, 2, 7, 0.3);
            let g = grad_a_frozen_b(&a, &u, &w0, &batch, &glm).unwrap();
            let fd = numeric_grad(&a, |a| loss(&(&w0 + u.matrix() * a), &batch, &glm).unwrap());
            let err = max_rel_err(&g, &fd);
            assert!(err < FD_REL_TOL, "{name} seed {seed}: {err:e}");

            let chain = u.matrix().transpose() * grad_w(&(&w0 + u.matrix() * &a), &batch, &glm).unwrap();
            assert!((g - chain).amax() < EXACT_TOL);
        }
    }
}

#[test]
fn readout_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut rng = substream(seed, 0);
        let head = gaussian_matrix(&mut rng, 3, 6, 0.5);
        let glm = GlmLoss::new(OutputMap::Readout { head, activation: Activation::Tanh }, Potential::LogSumExp);
        let batch = random_batch(seed, 9, 5, 3, true);
        let w = gaussian_matrix(&mut rng, 6, 5, 0.5);
        let g = grad_w(&w, &batch, &glm).unwrap();
        let fd = numeric_grad(&w, |w| loss(w, &batch, &glm).unwrap());
        assert!(max_rel_err(&g, &fd) < FD_REL_TOL, "seed {seed}");
    }
}

#[test]
fn loss_matches_naive_loop() {
    for seed in 0..10 {
        let batch = random_batch(seed, 5, 4, 3, true);
        let w = gaussian_matrix(&mut substream(seed, 0), 3, 4, 1.0);
        let mut naive = 0.0;
        for i in 0..5 {
            let mut logits = [0.0f64; 3];
            for k in 0..3 {
                for j in 0..4 {
                    logits[k] += w[(k, j)] * batch.x()[(i, j)];
                }
            }
            let lse = logits.iter().map(|z| z.exp()).sum::<f64>().ln();
            let picked: f64 = (0..3).map(|k| batch.y()[(i, k)] * logits[k]).sum();
            naive += lse - picked;
        }
        let fast = loss(&w, &batch, &GlmLoss::logistic()).unwrap();
        assert!((fast - naive).abs() < 1e-12, "{fast} vs {naive}");
    }
}

#[test]
fn softmax_matches_naive_and_normalizes() {
    for seed in 0..20 {
        let z = gaussian_matrix::<f64, _>(&mut substream(seed, 0), 6, 1, 3.0).column(0).into_owned();
        let p = softmax(z.as_view());
        let total: f64 = z.iter().map(|v| v.exp()).sum();
        for (pi, zi) in p.iter().zip(z.iter()) {
            assert!((pi - zi.exp() / total).abs() < 1e-12);
        }
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }
}
