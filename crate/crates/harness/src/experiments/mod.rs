//! Experiment runners.
//!
//! Each trial derives its seed with `child_seed(config.seed, trial_index)`
//! and trials run on the rayon pool; results are collected in trial-index
//! order, so output does not depend on scheduling.

mod bound;
mod figure1;
mod grad;
mod lsq;
mod similarity;
mod sweep;
mod toy_asymmetry;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use crate::record::TrialRecord;

pub use bound::run_bound;
pub use figure1::run_figure1_toy;
pub use grad::run_grad_check;
pub use lsq::run_verify_lsq;
pub use similarity::{random_invertible, run_similarity};
pub use sweep::{fraction_is_monotone as sweep_fraction_is_monotone, run_theorem1_sweep, summarize_sweep};
pub use toy_asymmetry::{run_toy_asymmetry, VARIANTS as TOY_VARIANTS};

/// Records of a run, plus per-cell aggregates for experiments that have them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<TrialRecord>,
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    match config.experiment {
        Experiment::VerifyLsq => Ok(Outcome { records: run_verify_lsq(config)?, summary: Vec::new() }),
        Experiment::Theorem1Sweep => {
            let records = run_theorem1_sweep(config)?;
            let summary = summarize_sweep(config, &records);
            Ok(Outcome { records, summary })
        }
        Experiment::GradCheck => Ok(Outcome { records: run_grad_check(config)?, summary: Vec::new() }),
        Experiment::Bound => Ok(Outcome { records: run_bound(config)?, summary: Vec::new() }),
        Experiment::ToyAsymmetry => Ok(Outcome { records: run_toy_asymmetry(config)?, summary: Vec::new() }),
        Experiment::Figure1Toy => Ok(Outcome { records: run_figure1_toy(config)?, summary: Vec::new() }),
        Experiment::Similarity => Ok(Outcome { records: run_similarity(config)?, summary: Vec::new() }),
    }
}

/// `(d_in, d_out, r)` for every grid cell, dims outermost.
pub(crate) fn cells(config: &ExperimentConfig) -> Vec<(usize, usize, usize)> {
    config.dims.iter().flat_map(|&(d_in, d_out)| config.ranks.iter().map(move |&r| (d_in, d_out, r))).collect()
}

pub(crate) fn cell_label(d_in: usize, d_out: usize, r: usize) -> String {
    format!("{d_in}x{d_out}-r{r}")
}

/// Collects fallible per-index results in index order.
pub(crate) fn par_trials<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}
