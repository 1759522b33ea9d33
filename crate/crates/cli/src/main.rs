//! `mlbm` — co-clustering of mixed continuous/binary data tables.
//!
//! Subcommands: `generate` (synthetic benchmark datasets), `fit` (run the
//! variational EM on a data CSV), `eval` (ARI between two partition files),
//! `experiment` (full grid from a plan file). Exit codes: 0 on success, 1 on
//! runtime failure, 2 on usage errors.

mod experiment;
mod io;
mod violin;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use mlbm_core::{
    ari, fit, generate, layout_by_name, ConfusionLevel, GenError, ModelSpec, VemConfig,
};

#[derive(Parser)]
#[command(name = "mlbm", version, about = "Latent block co-clustering of mixed data tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a built-in layout
    Generate(GenerateArgs),
    /// Fit the block model to a data CSV
    Fit(FitArgs),
    /// Adjusted Rand index between two partition CSVs
    Eval(EvalArgs),
    /// Run a full experiment grid from a JSON plan
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Layout name: exp1, exp2-222, exp2-333, exp2-444, sym-222, sym-333, sym-444
    #[arg(long)]
    layout: String,
    /// Number of rows
    #[arg(long)]
    size: usize,
    /// Columns per family (default: square, one column of each family per row)
    #[arg(long)]
    cols: Option<usize>,
    /// Confusion level: low, medium or high
    #[arg(long)]
    confusion: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (data.csv, truth.csv, config.json)
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Input data CSV (columns c_* continuous, b_* binary)
    #[arg(long)]
    data: PathBuf,
    /// Row clusters
    #[arg(long)]
    g: usize,
    /// Continuous column clusters
    #[arg(long)]
    mc: usize,
    /// Binary column clusters
    #[arg(long)]
    md: usize,
    /// Which columns to use
    #[arg(long, default_value = "mixed", value_parser = ["mixed", "continuous", "binary"])]
    mode: String,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Maximum outer iterations
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Maximum iterations of each inner loop
    #[arg(long, default_value_t = 10)]
    inner_max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps_inner: f64,
    #[arg(long, default_value_t = 1e-10)]
    eps_outer: f64,
    /// Forced minimum outer iterations
    #[arg(long, default_value_t = 10)]
    min_outer: usize,
    #[arg(long, default_value_t = 5)]
    warmup_steps: usize,
    #[arg(long, default_value_t = 0.3)]
    warmup_damping: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (params.json, memberships.csv, partition.csv, fc_trace.csv)
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// First partition CSV (columns row/ccol/bcol)
    a: PathBuf,
    /// Second partition CSV
    b: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment plan JSON
    #[arg(long)]
    plan: PathBuf,
    /// Output directory (overrides the plan's output_dir)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

/// Usage errors (bad flag *values*) exit with 2, like clap's own parse
/// errors; everything else is a runtime failure and exits with 1.
enum AppError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for AppError {
    fn from(e: anyhow::Error) -> Self {
        AppError::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_thread_pool();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// MLBM_THREADS caps the rayon worker pool (default: available parallelism).
fn configure_thread_pool() {
    if let Ok(v) = std::env::var("MLBM_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn parse_confusion(s: &str) -> Result<ConfusionLevel, AppError> {
    ConfusionLevel::parse(s).map_err(|_| AppError::Usage(format!("unknown confusion level '{s}'")))
}

fn cmd_generate(args: GenerateArgs) -> Result<(), AppError> {
    let layout = match layout_by_name(&args.layout) {
        Ok(l) => l,
        Err(GenError::UnknownLayout(name)) => {
            return Err(AppError::Usage(format!(
                "unknown layout '{name}' (expected one of exp1, exp2-222, exp2-333, exp2-444, sym-222, sym-333, sym-444)"
            )))
        }
        Err(e) => return Err(AppError::Runtime(anyhow!("{e}"))),
    };
    let confusion = parse_confusion(&args.confusion)?;
    let cols = args.cols.unwrap_or(args.size);
    let cfg = layout.config(args.size, cols, cols, confusion, args.seed);
    let ds = generate(&cfg).map_err(|e| AppError::Usage(format!("{e}")))?;
    io::write_dataset(&args.out, &ds, Some(layout.name))?;
    println!(
        "wrote {} ({} rows, {}+{} columns)",
        args.out.display(),
        ds.data.n(),
        ds.data.d_c(),
        ds.data.d_d()
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<(), AppError> {
    let full = io::read_data_csv(&args.data)?;
    let (data, spec) = match args.mode.as_str() {
        "continuous" => (full.continuous_only(), ModelSpec::new(args.g, args.mc, 0)),
        "binary" => (full.binary_only(), ModelSpec::new(args.g, 0, args.md)),
        _ => (full, ModelSpec::new(args.g, args.mc, args.md)),
    };
    let cfg = VemConfig {
        max_outer: args.max_iter,
        max_inner: args.inner_max_iter,
        eps_inner: args.eps_inner,
        eps_outer: args.eps_outer,
        min_outer: args.min_outer,
        warmup_steps: args.warmup_steps,
        warmup_damping: args.warmup_damping,
        n_restarts: args.restarts,
        seed: args.seed,
    };
    cfg.check().map_err(AppError::Usage)?;
    spec.check_against(&data).map_err(|e| AppError::Usage(e.to_string()))?;
    let result = fit(&data, spec, &cfg)
        .with_context(|| format!("fitting {}", args.data.display()))?;
    io::write_fit_outputs(&args.out, &result, &args.mode)?;
    println!(
        "fc = {}, outer_iters = {}, converged = {}, outputs in {}",
        result.final_fc(),
        result.outer_iters,
        result.converged,
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), AppError> {
    let a = io::read_labels_csv(&args.a)?;
    let b = io::read_labels_csv(&args.b)?;
    let pair = |x: &[usize], y: &[usize]| -> Result<Option<f64>> {
        if x.is_empty() && y.is_empty() {
            return Ok(None);
        }
        ari(x, y).map(Some).map_err(|e| anyhow!("{e}"))
    };
    let row = pair(&a.row_labels, &b.row_labels)?;
    let ccol = pair(&a.ccol_labels, &b.ccol_labels)?;
    let bcol = pair(&a.bcol_labels, &b.bcol_labels)?;

    let mut out = serde_json::Map::new();
    if let Some(v) = row {
        out.insert("ari".into(), v.into());
        out.insert("row_ari".into(), v.into());
        out.insert("n_rows".into(), a.row_labels.len().into());
    }
    if let Some(v) = ccol {
        out.insert("ccol_ari".into(), v.into());
    }
    if let Some(v) = bcol {
        out.insert("bcol_ari".into(), v.into());
    }
    println!("{}", serde_json::Value::Object(out));
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), AppError> {
    let plan = io::read_plan(&args.plan).map_err(|e| AppError::Usage(format!("{e:#}")))?;
    let out_dir = args
        .out
        .or_else(|| plan.output_dir.clone().map(PathBuf::from))
        .ok_or_else(|| AppError::Usage("no output directory (plan output_dir or -o)".into()))?;
    experiment::run(&plan, &out_dir)?;
    println!("experiment outputs in {}", out_dir.display());
    Ok(())
}
