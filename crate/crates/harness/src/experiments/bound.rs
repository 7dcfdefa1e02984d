use asymlora_core::bound::{
    generalization_bound, matched_rank, trainable_params, FineTuneSpec, MatchCriterion, TuneMode,
};

use super::{cell_label, cells};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::record::TrialRecord;

/// Bounds and parameter counts for `layers` identical layers per grid cell.
pub fn run_bound(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let hash = config.hash();
    cells(config)
        .into_iter()
        .map(|(d_in, d_out, r)| {
            let spec = FineTuneSpec::uniform(
                config.layers,
                d_in,
                d_out,
                r,
                config.quant_bits,
                config.samples,
                config.sub_gaussian_sigma,
                TuneMode::BA,
            )?;
            let b = spec.with_mode(TuneMode::BOnly);
            let a = spec.with_mode(TuneMode::AOnly);
            let (bound_ba, bound_b) = (generalization_bound(&spec), generalization_bound(&b));
            let (params_ba, params_b) = (trainable_params(&spec), trainable_params(&b));
            Ok(TrialRecord::new("bound", &cell_label(d_in, d_out, r), &hash, config.seed, d_in, d_out, r)
                .with("bound_ba", bound_ba)
                .with("bound_b", bound_b)
                .with("bound_a", generalization_bound(&a))
                .with("params_ba", params_ba as f64)
                .with("params_b", params_b as f64)
                .with("params_a", trainable_params(&a) as f64)
                .with("bound_ratio_b_ba", bound_b / bound_ba)
                .with("param_ratio_b_ba", params_b as f64 / params_ba as f64)
                .with("matched_rank_params", matched_rank(&spec, MatchCriterion::EqualParams)? as f64)
                .with("matched_rank_bound", matched_rank(&spec, MatchCriterion::EqualBound)? as f64)
                .with("quant_bits", config.quant_bits as f64)
                .with("layers", config.layers as f64))
        })
        .collect()
}
