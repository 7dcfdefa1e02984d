//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, lists are comma-separated.
//! Dimension pairs are written `d_inxd_out` (`32x32, 64x64`); tolerances as
//! `name:value` pairs. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    VerifyLsq,
    Theorem1Sweep,
    GradCheck,
    Bound,
    ToyAsymmetry,
    Figure1Toy,
    Similarity,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::VerifyLsq,
        Experiment::Theorem1Sweep,
        Experiment::GradCheck,
        Experiment::Bound,
        Experiment::ToyAsymmetry,
        Experiment::Figure1Toy,
        Experiment::Similarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::VerifyLsq => "verify-lsq",
            Experiment::Theorem1Sweep => "theorem1-sweep",
            Experiment::GradCheck => "grad-check",
            Experiment::Bound => "bound",
            Experiment::ToyAsymmetry => "toy-asymmetry",
            Experiment::Figure1Toy => "figure1-toy",
            Experiment::Similarity => "similarity",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Everything an experiment run depends on.
///
/// The first block mirrors the documented fields; the second holds knobs of
/// the synthetic tasks and trainers, each with a per-experiment default.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dims: Vec<(usize, usize)>,
    pub ranks: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub monte_carlo_samples: usize,
    pub output_path: Option<PathBuf>,
    pub tolerances: BTreeMap<String, f64>,

    pub noise_var: f64,
    pub shift_rank: usize,
    pub shift_scale: f64,
    pub layers: usize,
    pub quant_bits: u32,
    pub samples: u64,
    pub sub_gaussian_sigma: f64,
    pub classes: usize,
    pub input_rank: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub runs: usize,
}

impl ExperimentConfig {
    /// Defaults for `experiment`, matching the desk-scale reference runs.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            dims: vec![(8, 8)],
            ranks: vec![2],
            trials: 10,
            seed: 0,
            monte_carlo_samples: 200_000,
            output_path: None,
            tolerances: BTreeMap::new(),
            noise_var: 1.0,
            shift_rank: 8,
            shift_scale: 1.0,
            layers: 1,
            quant_bits: asymlora_core::bound::DEFAULT_QUANT_BITS,
            samples: 10_000,
            sub_gaussian_sigma: 1.0,
            classes: 4,
            input_rank: 16,
            steps: 1000,
            learning_rate: 0.5,
            train_size: 256,
            test_size: 1024,
            runs: 5,
        };
        match experiment {
            Experiment::VerifyLsq => {
                c.dims = vec![(8, 8), (16, 16), (32, 32)];
                c.ranks = vec![1, 2, 4];
                c.trials = 100;
            }
            Experiment::Theorem1Sweep => {
                c.dims = vec![(64, 64), (128, 128), (256, 256)];
                c.ranks = vec![4];
                c.trials = 200;
                c.noise_var = 0.0;
                c.tolerances.insert("gap".into(), 1e-9);
            }
            Experiment::GradCheck => {
                c.dims = vec![(7, 5)];
                c.ranks = vec![2];
                c.trials = 20;
                c.classes = 5;
                c.train_size = 10;
            }
            Experiment::Bound => {
                c.dims = vec![(1024, 1024)];
                c.ranks = vec![8];
                c.trials = 1;
                c.layers = 24;
            }
            Experiment::ToyAsymmetry => {
                c.dims = vec![(32, 32)];
                c.ranks = vec![4];
                c.trials = 50;
                c.shift_scale = 3.0;
                c.learning_rate = 0.1;
            }
            Experiment::Figure1Toy => {
                c.dims = vec![(32, 32)];
                c.ranks = vec![4];
                c.trials = 1;
                c.shift_scale = 3.0;
                c.input_rank = 32;
                c.steps = 500;
                c.learning_rate = 0.02;
            }
            Experiment::Similarity => {
                c.dims = vec![(256, 256)];
                c.ranks = vec![8];
                c.trials = 1000;
            }
        }
        c
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses config text. `experiment` must be set; everything else falls
    /// back to that experiment's defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let experiment = pairs
            .iter()
            .find(|(k, _)| k == "experiment")
            .ok_or_else(|| HarnessError::Config("missing `experiment` key".into()))?
            .1
            .parse()?;
        let mut config = Self::defaults(experiment);
        for (key, value) in &pairs {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Assigns one key. Used by the parser and by CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.parse()?,
            "dims" => self.dims = parse_list(value, parse_dim)?,
            "ranks" => self.ranks = parse_list(value, |s| number(key, s))?,
            "trials" => self.trials = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "monte_carlo_samples" => self.monte_carlo_samples = number(key, value)?,
            "output_path" => self.output_path = Some(PathBuf::from(value)),
            "tolerances" => {
                for (name, tol) in parse_list(value, parse_tolerance)? {
                    self.tolerances.insert(name, tol);
                }
            }
            "noise_var" => self.noise_var = number(key, value)?,
            "shift_rank" => self.shift_rank = number(key, value)?,
            "shift_scale" => self.shift_scale = number(key, value)?,
            "layers" => self.layers = number(key, value)?,
            "quant_bits" => self.quant_bits = number(key, value)?,
            "samples" => self.samples = number(key, value)?,
            "sub_gaussian_sigma" => self.sub_gaussian_sigma = number(key, value)?,
            "classes" => self.classes = number(key, value)?,
            "input_rank" => self.input_rank = number(key, value)?,
            "steps" => self.steps = number(key, value)?,
            "learning_rate" => self.learning_rate = number(key, value)?,
            "train_size" => self.train_size = number(key, value)?,
            "test_size" => self.test_size = number(key, value)?,
            "runs" => self.runs = number(key, value)?,
            other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.dims.is_empty() || self.ranks.is_empty() {
            return fail("dims and ranks must be non-empty".into());
        }
        if self.dims.iter().any(|&(a, b)| a == 0 || b == 0) {
            return fail("dimensions must be at least 1".into());
        }
        if self.ranks.contains(&0) {
            return fail("ranks must be at least 1".into());
        }
        let counts = [
            ("trials", self.trials),
            ("monte_carlo_samples", self.monte_carlo_samples),
            ("layers", self.layers),
            ("classes", self.classes),
            ("input_rank", self.input_rank),
            ("train_size", self.train_size),
            ("test_size", self.test_size),
            ("runs", self.runs),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return fail(format!("{name} must be at least 1"));
        }
        if let Some((name, v)) = self.tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
            return fail(format!("tolerance {name} = {v} must be positive"));
        }
        if !(self.noise_var >= 0.0) || !(self.shift_scale >= 0.0) {
            return fail("noise_var and shift_scale must be non-negative".into());
        }
        if !(self.learning_rate > 0.0) || !(self.sub_gaussian_sigma > 0.0) {
            return fail("learning_rate and sub_gaussian_sigma must be positive".into());
        }
        if self.samples == 0 || self.quant_bits == 0 {
            return fail("samples and quant_bits must be at least 1".into());
        }
        Ok(())
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// Normalized text form: every key, fixed order, one per line.
    pub fn canonical(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|(a, b)| format!("{a}x{b}")).collect();
        let ranks: Vec<String> = self.ranks.iter().map(|r| r.to_string()).collect();
        let tols: Vec<String> = self.tolerances.iter().map(|(k, v)| format!("{k}:{v:e}")).collect();
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("experiment", self.experiment.to_string());
        line("dims", dims.join(", "));
        line("ranks", ranks.join(", "));
        line("trials", self.trials.to_string());
        line("seed", self.seed.to_string());
        line("monte_carlo_samples", self.monte_carlo_samples.to_string());
        if let Some(p) = &self.output_path {
            line("output_path", p.display().to_string());
        }
        line("tolerances", tols.join(", "));
        line("noise_var", format!("{:e}", self.noise_var));
        line("shift_rank", self.shift_rank.to_string());
        line("shift_scale", format!("{:e}", self.shift_scale));
        line("layers", self.layers.to_string());
        line("quant_bits", self.quant_bits.to_string());
        line("samples", self.samples.to_string());
        line("sub_gaussian_sigma", format!("{:e}", self.sub_gaussian_sigma));
        line("classes", self.classes.to_string());
        line("input_rank", self.input_rank.to_string());
        line("steps", self.steps.to_string());
        line("learning_rate", format!("{:e}", self.learning_rate));
        line("train_size", self.train_size.to_string());
        line("test_size", self.test_size.to_string());
        line("runs", self.runs.to_string());
        out
    }

    /// SHA-256 of the canonical form, hex encoded. The output path is not
    /// part of the hash so moving results does not change their provenance.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_path = None;
        hex::encode(Sha256::digest(c.canonical().as_bytes()))
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| HarnessError::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list<T>(value: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect()
}

fn parse_dim(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once('x')
        .ok_or_else(|| HarnessError::Config(format!("dimension `{s}` is not of the form d_inxd_out")))?;
    Ok((number("dims", a)?, number("dims", b)?))
}

fn parse_tolerance(s: &str) -> Result<(String, f64)> {
    let (name, v) = s
        .split_once(':')
        .ok_or_else(|| HarnessError::Config(format!("tolerance `{s}` is not of the form name:value")))?;
    Ok((name.trim().to_string(), number("tolerances", v)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_comments() {
        let c = ExperimentConfig::parse(
            "experiment = theorem1-sweep\n# grid\ndims = 64x64, 128x128\nranks = 2,4\ntrials = 5 # few\ntolerances = gap:1e-8\n",
        )
        .unwrap();
        assert_eq!(c.dims, vec![(64, 64), (128, 128)]);
        assert_eq!(c.ranks, vec![2, 4]);
        assert_eq!(c.trials, 5);
        assert_eq!(c.tolerance("gap", 0.0), 1e-8);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ExperimentConfig::parse("experiment = bound\ncolour = red\n").unwrap_err();
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::parse("dims = 8x8\n").is_err());
        assert!(ExperimentConfig::parse("experiment = bound\ntrials = 0\n").is_err());
        assert!(ExperimentConfig::parse("experiment = bound\ndims = 8by8\n").is_err());
        assert!(ExperimentConfig::parse("experiment = bound\ntolerances = gap:-1\n").is_err());
        assert!(ExperimentConfig::parse("experiment = nope\n").is_err());
        assert!(ExperimentConfig::parse("experiment = bound\nranks\n").is_err());
    }

    #[test]
    fn canonical_form_round_trips() {
        let c = ExperimentConfig::defaults(Experiment::ToyAsymmetry);
        let again = ExperimentConfig::parse(&c.canonical()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
    }

    #[test]
    fn hash_tracks_seed_but_not_output_path() {
        let a = ExperimentConfig::defaults(Experiment::Bound);
        let mut b = a.clone();
        b.output_path = Some("elsewhere.csv".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
