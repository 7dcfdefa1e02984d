use asymlora_core::rng::{child_seed, gaussian_matrix, substream};
use asymlora_core::similarity::{cca_similarity, Side};
use asymlora_core::Matrix;

use super::par_trials;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::record::TrialRecord;

/// Random invertible `r × r` matrix: Gaussian, redrawn until its condition
/// number is below 1e6.
pub fn random_invertible(rng: &mut asymlora_core::rng::StreamRng, r: usize) -> Matrix {
    loop {
        let c = gaussian_matrix(rng, r, r, 1.0);
        if asymlora_core::linalg::condition_number(&c) < 1e6 {
            return c;
        }
    }
}

/// Similarity of independent Gaussian `d × r` pairs, with self-similarity
/// and reparameterization checks (`runs` random `C` per trial).
pub fn run_similarity(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let (d, _) = config.dims[0];
    let r = config.ranks[0];
    let hash = config.hash();
    par_trials(config.trials, |t| {
        let seed = child_seed(config.seed, t as u64);
        let mut rng = substream(seed, 0);
        let x: Matrix = gaussian_matrix(&mut rng, d, r, 1.0);
        let y = gaussian_matrix(&mut rng, d, r, 1.0);
        let sim = cca_similarity(&x, &y, Side::ColumnSpace)?;
        let self_err = (cca_similarity::<f64>(&x, &x, Side::ColumnSpace)? - 1.0).abs();
        let mut invariance = 0.0f64;
        for _ in 0..config.runs {
            let c = random_invertible(&mut rng, r);
            invariance = invariance.max((cca_similarity(&x, &(&x * c), Side::ColumnSpace)? - 1.0).abs());
        }
        Ok(TrialRecord::new("similarity", "", &hash, seed, d, d, r)
            .with("similarity", sim)
            .with("self_similarity_error", self_err)
            .with("invariance_error", invariance))
    })
}
