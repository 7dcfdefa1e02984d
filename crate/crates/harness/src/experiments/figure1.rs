use asymlora_core::rng::child_seed;
use asymlora_core::similarity::{basis_similarity, orthonormal_basis, Side, SubspaceBasis};
use asymlora_core::{Adapter, FreezeMode, InitScheme};

use super::par_trials;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::record::TrialRecord;
use crate::toy::{ToyBase, ToyFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// One task, a different random initialization per run.
    SameTask,
    /// One initialization, a different task per run.
    FixedInit,
    /// A different task and initialization per run.
    RandomInit,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::SameTask, Scenario::FixedInit, Scenario::RandomInit];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SameTask => "same-task",
            Scenario::FixedInit => "fixed-init",
            Scenario::RandomInit => "random-init",
        }
    }
}

pub fn init_name(init: InitScheme) -> &'static str {
    match init {
        InitScheme::Standard => "standard",
        InitScheme::Reversed => "reversed",
    }
}

/// `(task seed, init seed)` of run `k` in `scenario`.
fn run_seeds(seed: u64, scenario: Scenario, k: u64) -> (u64, u64) {
    let task = |i| child_seed(seed, 100 + i);
    let init = |i| child_seed(seed, 200 + i);
    match scenario {
        Scenario::SameTask => (task(0), init(k)),
        Scenario::FixedInit => (task(k), init(0)),
        Scenario::RandomInit => (task(k), child_seed(seed, 300 + k)),
    }
}

fn mean_pairwise(bases: &[SubspaceBasis<f64>]) -> (f64, usize) {
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            total += basis_similarity(&bases[i], &bases[j]);
            pairs += 1;
        }
    }
    (total / pairs.max(1) as f64, pairs)
}

/// Full-LoRA training under the three scenarios, for standard (`B = 0`) and
/// reversed (`A = 0`) initialization. One record per (initialization,
/// scenario) with the mean pairwise similarity of the learned `A`s
/// (row space) and `B`s (column space).
pub fn run_figure1_toy(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let family = ToyFamily::from_config(config);
    let r = config.ranks[0];
    let runs = config.runs.max(2);
    let base = ToyBase::generate(&family, child_seed(config.seed, 0));
    let hash = config.hash();

    let mut jobs = Vec::new();
    for init in [InitScheme::Standard, InitScheme::Reversed] {
        for scenario in Scenario::ALL {
            for k in 0..runs {
                jobs.push((init, scenario, run_seeds(config.seed, scenario, k as u64)));
            }
        }
    }
    let adapters: Vec<Adapter> = par_trials(jobs.len(), |j| {
        let (init, _, (task_seed, init_seed)) = jobs[j];
        let task = base.task(task_seed)?;
        let trace = base.fit(&task, FreezeMode::TrainBoth, init, r, init_seed, config.learning_rate, config.steps)?;
        Ok(trace.adapter)
    })?;

    let mut records = Vec::new();
    for (chunk, group) in adapters.chunks(runs).enumerate() {
        let (init, scenario, _) = jobs[chunk * runs];
        let a: Vec<_> =
            group.iter().map(|ad| orthonormal_basis(&ad.a, Side::RowSpace)).collect::<asymlora_core::Result<_>>()?;
        let b: Vec<_> =
            group.iter().map(|ad| orthonormal_basis(&ad.b, Side::ColumnSpace)).collect::<asymlora_core::Result<_>>()?;
        let (sim_a, pairs) = mean_pairwise(&a);
        let (sim_b, _) = mean_pairwise(&b);
        let variant = format!("{}/{}", init_name(init), scenario.name());
        records.push(
            TrialRecord::new("figure1-toy", &variant, &hash, config.seed, family.d, family.d, r)
                .with("sim_a", sim_a)
                .with("sim_b", sim_b)
                .with("pairs", pairs as f64),
        );
    }
    Ok(records)
}
