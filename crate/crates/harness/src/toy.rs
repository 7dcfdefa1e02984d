//! Synthetic two-layer classification tasks.
//!
//! A pretrained network `x ↦ softmax(W₂ tanh(W₁ x))` is shared by every task
//! of a family. A task shifts the hidden layer to `W₁ + Δ` with a random
//! low-rank `Δ` and draws labels from the shifted network's softmax. Adapters
//! are attached to `W₁`; the readout `W₂` stays fixed.
//!
//! Inputs are either isotropic Gaussian or confined to a random
//! `input_rank`-dimensional subspace (`x = F n`), the redundant-input regime
//! where a random input projection loses little.

use asymlora_core::glm::{softmax, train, Activation, GlmLoss, LabeledBatch, OutputMap, Potential, TrainTrace};
use asymlora_core::rng::{gaussian_matrix, substream, StreamRng};
use asymlora_core::stiefel::random_low_rank_with;
use asymlora_core::{Adapter, Batch, FreezeMode, InitScheme, Matrix};
use rand::Rng;

use crate::config::ExperimentConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyFamily {
    pub d: usize,
    pub classes: usize,
    pub input_rank: usize,
    pub shift_rank: usize,
    pub shift_scale: f64,
    pub train_size: usize,
    pub test_size: usize,
}

impl ToyFamily {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        let (d_in, _) = config.dims[0];
        Self {
            d: d_in,
            classes: config.classes,
            input_rank: config.input_rank.min(d_in),
            shift_rank: config.shift_rank.min(d_in),
            shift_scale: config.shift_scale,
            train_size: config.train_size,
            test_size: config.test_size,
        }
    }
}

/// The pretrained network and input law shared by a family's tasks.
#[derive(Debug, Clone)]
pub struct ToyBase {
    pub family: ToyFamily,
    pub w1: Matrix,
    pub head: Matrix,
    /// `d × input_rank` mixing matrix; `None` for isotropic inputs.
    pub mixing: Option<Matrix>,
}

impl ToyBase {
    pub fn generate(family: &ToyFamily, seed: u64) -> Self {
        let mut rng = substream(seed, 0);
        let d = family.d;
        let w1 = gaussian_matrix(&mut rng, d, d, (1.0 / d as f64).sqrt());
        let head = gaussian_matrix(&mut rng, family.classes, d, (4.0 / d as f64).sqrt());
        let mixing = (family.input_rank < d)
            .then(|| gaussian_matrix(&mut rng, d, family.input_rank, (d as f64).sqrt() / family.input_rank as f64));
        Self { family: family.clone(), w1, head, mixing }
    }

    pub fn loss(&self) -> GlmLoss<f64> {
        GlmLoss::new(OutputMap::Readout { head: self.head.clone(), activation: Activation::Tanh }, Potential::LogSumExp)
    }

    fn inputs(&self, rng: &mut StreamRng, n: usize) -> Matrix {
        match &self.mixing {
            Some(f) => gaussian_matrix(rng, n, f.ncols(), 1.0) * f.transpose(),
            None => gaussian_matrix(rng, n, self.family.d, 1.0),
        }
    }

    fn labelled(&self, w: &Matrix, rng: &mut StreamRng, n: usize) -> Result<Batch> {
        let x = self.inputs(rng, n);
        let hidden = (&x * w.transpose()).map(f64::tanh);
        let logits = hidden * self.head.transpose();
        let labels: Vec<usize> = logits
            .row_iter()
            .map(|row| {
                let p = softmax(row.transpose().as_view());
                let u: f64 = rng.random();
                let mut acc = 0.0;
                p.iter()
                    .position(|&pk| {
                        acc += pk;
                        u < acc
                    })
                    .unwrap_or(self.family.classes - 1)
            })
            .collect();
        Ok(LabeledBatch::classification(x, &labels, self.family.classes)?)
    }

    /// A task with its own shift and data, from stream `(seed, 0)`.
    pub fn task(&self, seed: u64) -> Result<ToyTask> {
        let mut rng = substream(seed, 0);
        let d = self.family.d;
        let delta = if self.family.shift_scale > 0.0 {
            random_low_rank_with(d, d, self.family.shift_rank, self.family.shift_scale, &mut rng)?
        } else {
            Matrix::zeros(d, d)
        };
        let teacher = &self.w1 + &delta;
        let train = self.labelled(&teacher, &mut rng, self.family.train_size)?;
        let test = self.labelled(&teacher, &mut rng, self.family.test_size)?;
        Ok(ToyTask { delta, train, test })
    }

    /// Trains one adapter on `task`, initialized from stream `(init_seed, 0)`.
    pub fn fit(
        &self,
        task: &ToyTask,
        mode: FreezeMode,
        init: InitScheme,
        rank: usize,
        init_seed: u64,
        lr: f64,
        steps: usize,
    ) -> Result<TrainTrace<f64>> {
        let d = self.family.d;
        let adapter = Adapter::initialize(d, d, rank, mode, init, init_seed)?;
        Ok(train(&task.train, &self.w1, adapter, &self.loss(), lr, steps)?)
    }

    /// Mean loss of the adapted network on `batch`.
    pub fn mean_loss(&self, adapter: &Adapter, batch: &Batch) -> Result<f64> {
        let w = &self.w1 + adapter.effective_update() * adapter.scale();
        Ok(asymlora_core::glm::loss(&w, batch, &self.loss())? / batch.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct ToyTask {
    pub delta: Matrix,
    pub train: Batch,
    pub test: Batch,
}
