//! Mutual-information generalization bounds for adapter fine-tuning.
//!
//! If every tuned parameter is stored with `q` bits, the mutual information
//! between the adapter and the training set is at most the number of tuned
//! bits, and for a σ-sub-Gaussian loss the expected generalization error is
//! bounded by `√(2σ² · I / n)`. With `I ≤ q · r · Σᵢ D_i` this gives
//!
//! ```text
//! |gen| ≤ √( 2 r q σ² ln 2 / n · Σᵢ D_i )
//! ```
//!
//! where `D_i` is `d_in + d_out` when both factors are tuned, `d_out` when
//! only `B` is, and `d_in` when only `A` is.

use std::f64::consts::LN_2;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Quantization width used when none is given.
pub const DEFAULT_QUANT_BITS: u32 = 16;

/// Which factors are tuned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TuneMode {
    /// Both `B` and `A`.
    BA,
    /// `B` only, `A` frozen at a random frame.
    BOnly,
    /// `A` only, `B` frozen at a random frame.
    AOnly,
}

impl FromStr for TuneMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "BA" | "ba" => Ok(TuneMode::BA),
            "B-only" | "b-only" | "B" | "b" => Ok(TuneMode::BOnly),
            "A-only" | "a-only" | "A" | "a" => Ok(TuneMode::AOnly),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}` (BA, B-only, A-only)"))),
        }
    }
}

impl std::fmt::Display for TuneMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TuneMode::BA => "BA",
            TuneMode::BOnly => "B-only",
            TuneMode::AOnly => "A-only",
        })
    }
}

/// Shape of one tuned weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerShape {
    pub d_in: usize,
    pub d_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneSpec {
    layers: Vec<LayerShape>,
    rank: usize,
    quant_bits: u32,
    n_samples: u64,
    sub_gaussian_sigma: f64,
    mode: TuneMode,
}

impl FineTuneSpec {
    pub fn new(
        layers: Vec<LayerShape>,
        rank: usize,
        quant_bits: u32,
        n_samples: u64,
        sub_gaussian_sigma: f64,
        mode: TuneMode,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("at least one tuned layer is required".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.d_in == 0 || l.d_out == 0 {
                return Err(Error::Dimension(format!("layer {i} has an empty dimension")));
            }
            if rank > l.d_in.min(l.d_out) {
                return Err(Error::Dimension(format!(
                    "rank {rank} exceeds min(d_in, d_out) = {} of layer {i}",
                    l.d_in.min(l.d_out)
                )));
            }
        }
        if quant_bits == 0 {
            return Err(Error::InvalidArgument("quantization needs at least one bit".into()));
        }
        if n_samples == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        if !(sub_gaussian_sigma > 0.0) || !sub_gaussian_sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("σ must be positive, got {sub_gaussian_sigma}")));
        }
        Ok(Self { layers, rank, quant_bits, n_samples, sub_gaussian_sigma, mode })
    }

    /// `count` identical layers of shape `d_in → d_out`.
    pub fn uniform(
        count: usize,
        d_in: usize,
        d_out: usize,
        rank: usize,
        quant_bits: u32,
        n_samples: u64,
        sub_gaussian_sigma: f64,
        mode: TuneMode,
    ) -> Result<Self> {
        Self::new(vec![LayerShape { d_in, d_out }; count], rank, quant_bits, n_samples, sub_gaussian_sigma, mode)
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn quant_bits(&self) -> u32 {
        self.quant_bits
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn sub_gaussian_sigma(&self) -> f64 {
        self.sub_gaussian_sigma
    }

    pub fn mode(&self) -> TuneMode {
        self.mode
    }

    pub fn with_mode(&self, mode: TuneMode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn with_rank(&self, rank: usize) -> Result<Self> {
        Self::new(self.layers.clone(), rank, self.quant_bits, self.n_samples, self.sub_gaussian_sigma, self.mode)
    }

    pub fn with_samples(&self, n_samples: u64) -> Result<Self> {
        Self::new(self.layers.clone(), self.rank, self.quant_bits, n_samples, self.sub_gaussian_sigma, self.mode)
    }

    /// `Σᵢ D_i` for the spec's mode.
    fn tuned_width(&self) -> u64 {
        self.layers
            .iter()
            .map(|l| match self.mode {
                TuneMode::BA => (l.d_in + l.d_out) as u64,
                TuneMode::BOnly => l.d_out as u64,
                TuneMode::AOnly => l.d_in as u64,
            })
            .sum()
    }

    /// Largest rank every layer can hold.
    pub fn max_rank(&self) -> usize {
        self.layers.iter().map(|l| l.d_in.min(l.d_out)).min().unwrap_or(0)
    }
}

pub fn generalization_bound(spec: &FineTuneSpec) -> f64 {
    let sigma2 = spec.sub_gaussian_sigma * spec.sub_gaussian_sigma;
    let r = spec.rank as f64;
    let q = spec.quant_bits as f64;
    let n = spec.n_samples as f64;
    (2.0 * r * q * sigma2 * LN_2 / n * spec.tuned_width() as f64).sqrt()
}

/// `r · Σᵢ D_i`.
pub fn trainable_params(spec: &FineTuneSpec) -> u64 {
    spec.rank as u64 * spec.tuned_width()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchCriterion {
    EqualParams,
    EqualBound,
}

impl FromStr for MatchCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal-params" => Ok(MatchCriterion::EqualParams),
            "equal-bound" => Ok(MatchCriterion::EqualBound),
            other => Err(Error::InvalidArgument(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Relative slack when comparing two bounds that are analytically equal.
const BOUND_SLACK: f64 = 1e-12;

/// Largest rank for B-only tuning that stays within the BA spec's budget.
///
/// Capped at the smallest `min(d_in, d_out)` over the tuned layers.
pub fn matched_rank(spec_ba: &FineTuneSpec, criterion: MatchCriterion) -> Result<usize> {
    if spec_ba.mode != TuneMode::BA {
        return Err(Error::InvalidArgument(format!("rank matching starts from a BA spec, got {}", spec_ba.mode)));
    }
    let budget_params = trainable_params(spec_ba);
    let budget_bound = generalization_bound(spec_ba);
    let b_only = spec_ba.with_mode(TuneMode::BOnly);
    let mut best = 0;
    for r in 0..=spec_ba.max_rank() {
        let candidate = b_only.with_rank(r)?;
        let fits = match criterion {
            MatchCriterion::EqualParams => trainable_params(&candidate) <= budget_params,
            MatchCriterion::EqualBound => generalization_bound(&candidate) <= budget_bound * (1.0 + BOUND_SLACK),
        };
        if fits {
            best = r;
        } else {
            break;
        }
    }
    Ok(best)
}
