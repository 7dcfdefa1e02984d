#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asymlora_core::bound::{generalization_bound, trainable_params, TuneMode};
use asymlora_core::similarity::{cca_similarity, Side};
use asymlora_core::Matrix;
use asymlora_harness::experiments::{self, Outcome};
use asymlora_harness::{
    default_output, emit_report, summary_path, Experiment, ExperimentConfig, Format, HarnessError, Result,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "asymlora", version, about = "Asymmetric low-rank adapter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form least-squares losses against Monte Carlo.
    VerifyLsq(Common),
    /// Frozen-A vs frozen-B gap over a dimension/rank grid.
    Theorem1Sweep(Common),
    /// Analytic gradients against finite differences.
    GradCheck(Common),
    /// Generalization bounds and parameter counts.
    Bound(BoundArgs),
    /// Train the four adapter variants on synthetic tasks.
    ToyAsymmetry(Common),
    /// Subspace similarity of learned factors across scenarios.
    Figure1Toy(Common),
    /// CCA similarity of random pairs, or of two matrices given as files.
    Similarity(SimilarityArgs),
}

#[derive(Args)]
struct Common {
    /// Config file (`key = value` per line).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; defaults to `$ASYMLORA_OUT_DIR/<experiment>.<format>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    din: Option<usize>,
    #[arg(long)]
    dout: Option<usize>,
    /// Number of adapted layers.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Bits per stored parameter.
    #[arg(long)]
    qbits: Option<u32>,
    /// Training-set size.
    #[arg(long)]
    n: Option<u64>,
    /// Sub-Gaussian parameter of the loss.
    #[arg(long)]
    sigma: Option<f64>,
    /// BA, B-only or A-only.
    #[arg(long, default_value = "BA")]
    mode: String,
}

#[derive(Args)]
struct SimilarityArgs {
    #[command(flatten)]
    common: Common,
    /// First matrix, one comma-separated row per line.
    #[arg(long, requires = "y")]
    x: Option<PathBuf>,
    /// Second matrix.
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SideArg::Column)]
    side: SideArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Row,
    Column,
}

fn load_config(experiment: Experiment, common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::defaults(experiment),
    };
    if config.experiment != experiment {
        return Err(HarnessError::Config(format!(
            "config is for `{}`, subcommand is `{experiment}`",
            config.experiment
        )));
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn write(outcome: &Outcome, config: &ExperimentConfig, common: &Common) -> Result<()> {
    let format = match common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let path = common
        .out
        .clone()
        .or_else(|| config.output_path.clone())
        .unwrap_or_else(|| default_output(config.experiment, format));
    emit_report(&outcome.records, &path, format)?;
    println!("wrote {} records to {}", outcome.records.len(), path.display());
    if !outcome.summary.is_empty() {
        let spath = summary_path(&path, format);
        emit_report(&outcome.summary, &spath, format)?;
        println!("wrote summary to {}", spath.display());
    }
    Ok(())
}

fn run_experiment(experiment: Experiment, common: &Common) -> Result<()> {
    let config = load_config(experiment, common)?;
    let outcome = experiments::run(&config)?;
    if experiment == Experiment::Theorem1Sweep {
        for s in &outcome.summary {
            println!(
                "{}: fraction {:.4}, mean gap {:.6e}",
                s.variant,
                s.metric("fraction_nonnegative"),
                s.metric("mean_gap")
            );
        }
        if !experiments::sweep_fraction_is_monotone(&outcome.summary) {
            println!("note: fraction is not non-decreasing in d/r on this grid");
        }
    }
    write(&outcome, &config, common)
}

fn run_bound(args: &BoundArgs) -> Result<()> {
    let mut config = load_config(Experiment::Bound, &args.common)?;
    if let Some(din) = args.din {
        config.dims = vec![(din, args.dout.unwrap_or(din))];
    } else if let Some(dout) = args.dout {
        config.dims = vec![(dout, dout)];
    }
    if let Some(v) = args.layers {
        config.layers = v;
    }
    if let Some(v) = args.rank {
        config.ranks = vec![v];
    }
    if let Some(v) = args.qbits {
        config.quant_bits = v;
    }
    if let Some(v) = args.n {
        config.samples = v;
    }
    if let Some(v) = args.sigma {
        config.sub_gaussian_sigma = v;
    }
    config.validate()?;
    let mode: TuneMode = args.mode.parse()?;
    println!("q = {} bits per parameter", config.quant_bits);
    for &(d_in, d_out) in &config.dims {
        for &r in &config.ranks {
            let spec = asymlora_core::bound::FineTuneSpec::uniform(
                config.layers,
                d_in,
                d_out,
                r,
                config.quant_bits,
                config.samples,
                config.sub_gaussian_sigma,
                mode,
            )?;
            println!(
                "{d_in}x{d_out} r={r} x{} {mode}: bound {:.6e}, params {}",
                config.layers,
                generalization_bound(&spec),
                trainable_params(&spec)
            );
        }
    }
    let outcome = experiments::run(&config)?;
    write(&outcome, &config, &args.common)
}

fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::Format { path: path.to_path_buf(), message: e.to_string() })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| HarnessError::Format { path: path.to_path_buf(), message: e.to_string() })?;
        let values = row
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| HarnessError::Format { path: path.to_path_buf(), message: e.to_string() })?;
        rows.push(values);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(HarnessError::Format { path: path.to_path_buf(), message: "ragged or empty matrix".into() });
    }
    Ok(Matrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}

fn run_similarity(args: &SimilarityArgs) -> Result<()> {
    if let (Some(x), Some(y)) = (&args.x, &args.y) {
        let side = match args.side {
            SideArg::Row => Side::RowSpace,
            SideArg::Column => Side::ColumnSpace,
        };
        let sim = cca_similarity(&read_matrix(x)?, &read_matrix(y)?, side)?;
        println!("{sim:.16e}");
        return Ok(());
    }
    run_experiment(Experiment::Similarity, &args.common)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::VerifyLsq(c) => run_experiment(Experiment::VerifyLsq, c),
        Command::Theorem1Sweep(c) => run_experiment(Experiment::Theorem1Sweep, c),
        Command::GradCheck(c) => run_experiment(Experiment::GradCheck, c),
        Command::Bound(args) => run_bound(args),
        Command::ToyAsymmetry(c) => run_experiment(Experiment::ToyAsymmetry, c),
        Command::Figure1Toy(c) => run_experiment(Experiment::Figure1Toy, c),
        Command::Similarity(args) => run_similarity(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
