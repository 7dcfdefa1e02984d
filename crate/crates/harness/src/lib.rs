//! Experiment harness for asymmetric low-rank adapters: configuration,
//! synthetic tasks, runners and CSV/JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod record;
pub mod toy;

pub use config::{Experiment, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use record::{emit_report, Format, TrialRecord};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ASYMLORA_OUT_DIR";

/// Where a run writes when no explicit path is given:
/// `$ASYMLORA_OUT_DIR/<experiment>.<ext>`, else `results/<experiment>.<ext>`.
pub fn default_output(experiment: Experiment, format: Format) -> std::path::PathBuf {
    let dir = std::env::var_os(OUT_DIR_ENV).map(std::path::PathBuf::from).unwrap_or_else(|| "results".into());
    dir.join(format!("{}.{}", experiment.name(), format.extension()))
}

/// Sibling path for per-cell summaries: `runs/x.csv` → `runs/x.summary.csv`.
pub fn summary_path(path: &std::path::Path, format: Format) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.{}", format.extension()))
}
