use asymlora_core::rng::child_seed;
use asymlora_core::{FreezeMode, InitScheme};

use super::par_trials;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::record::TrialRecord;
use crate::toy::{ToyBase, ToyFamily};

/// The four trained variants: name, freeze mode, rank multiplier.
pub const VARIANTS: [(&str, FreezeMode, usize); 4] = [
    ("freeze_a", FreezeMode::FreezeA, 1),
    ("freeze_b", FreezeMode::FreezeB, 1),
    ("full_ba", FreezeMode::TrainBoth, 1),
    ("freeze_a_2r", FreezeMode::FreezeA, 2),
];

/// One synthetic task per seed; trains frozen-A, frozen-B and full BA at
/// rank `r` and frozen-A at rank `2r`, recording final train and held-out
/// mean losses.
pub fn run_toy_asymmetry(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let family = ToyFamily::from_config(config);
    let r = config.ranks[0];
    let hash = config.hash();
    par_trials(config.trials, |t| {
        let seed = child_seed(config.seed, t as u64);
        let base = ToyBase::generate(&family, child_seed(seed, 0));
        let task = base.task(child_seed(seed, 1))?;
        let w1 = base.w1.clone();
        let pretrained_train = asymlora_core::glm::loss(&w1, &task.train, &base.loss())? / task.train.len() as f64;
        let pretrained_test = asymlora_core::glm::loss(&w1, &task.test, &base.loss())? / task.test.len() as f64;
        let mut rec = TrialRecord::new("toy-asymmetry", "", &hash, seed, family.d, family.d, r)
            .with("pretrained_train_loss", pretrained_train)
            .with("pretrained_test_loss", pretrained_test);
        for (i, (name, mode, mult)) in VARIANTS.iter().enumerate() {
            let trace = base.fit(
                &task,
                *mode,
                InitScheme::Standard,
                r * mult,
                child_seed(seed, 2 + i as u64),
                config.learning_rate,
                config.steps,
            )?;
            let train = trace.final_loss();
            let test = base.mean_loss(&trace.adapter, &task.test)?;
            rec = rec
                .with(&format!("train_loss_{name}"), train)
                .with(&format!("test_loss_{name}"), test)
                .with(&format!("gen_gap_{name}"), test - train);
        }
        Ok(rec)
    })
}
