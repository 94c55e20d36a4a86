use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use horizon_core::bench::{
    emit_predictions, load_dataset, render_report, run_experiment, CiMethod, ExperimentConfig,
    ExperimentReport, ReportFormat, RunOptions,
};
use horizon_core::dataset::prepare;
use horizon_core::models::load_checkpoint;
use horizon_core::seriesgen::{generate, write_csv, ChaosParams, SYSTEM_NAMES};
use horizon_core::{CellUpdate, EmbedConfig, ModelKind, ScaleFit};

#[derive(Parser)]
#[command(
    name = "horizon-bench",
    version,
    about = "Multi-step-ahead forecasting benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (dataset, model) pair for several seeds and write a JSON report.
    Run(RunArgs),
    /// Render a JSON report as markdown, CSV or JSON.
    Report(ReportArgs),
    /// Write actual vs predicted values of a checkpointed model.
    Predict(PredictArgs),
    /// Generate a chaotic series as single-column CSV.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated generator names, data-dir CSV stems or CSV paths.
    #[arg(long, value_delimiter = ',', required = true)]
    datasets: Vec<String>,
    /// Comma-separated model kinds; all seven when omitted.
    #[arg(long, value_delimiter = ',')]
    models: Vec<ModelKind>,
    #[arg(long, default_value_t = 30)]
    runs: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    embed_dim: usize,
    #[arg(long, default_value_t = 1)]
    lag: usize,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 0.6)]
    train_frac: f64,
    /// Leading points kept from each series.
    #[arg(long, default_value_t = 1000)]
    max_points: usize,
    #[arg(long, value_enum, default_value_t = ScaleFitArg::Full)]
    scale_fit: ScaleFitArg,
    #[arg(long, default_value_t = 42)]
    master_seed: u64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    adam_lr: f64,
    #[arg(long, default_value_t = 0.01)]
    sgd_lr: f64,
    /// Global gradient-norm bound.
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long, value_enum, default_value_t = CellUpdateArg::Standard)]
    cell_update: CellUpdateArg,
    #[arg(long, value_enum, default_value_t = CiArg::StudentT)]
    ci: CiArg,
    /// Directory holding <name>.csv files.
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    /// Save every trained model here.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Worker threads (overrides HORIZON_BENCH_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    /// Record per-run wall time (makes reports differ between executions).
    #[arg(long)]
    wall_time: bool,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
    format: FormatArg,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset name; defaults to the one recorded in the checkpoint.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    /// Comma-separated 1-based horizons.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
    steps: Vec<usize>,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    /// Map values back to the original units.
    #[arg(long)]
    unscaled: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SYSTEM_NAMES))]
    system: String,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Override the number of discarded transient samples.
    #[arg(long)]
    discard: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleFitArg {
    Full,
    Train,
}

#[derive(Clone, Copy, ValueEnum)]
enum CellUpdateArg {
    Standard,
    Squashed,
}

#[derive(Clone, Copy, ValueEnum)]
enum CiArg {
    StudentT,
    Normal,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("writing stdout"),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let config = ExperimentConfig {
        datasets: args.datasets,
        models: if args.models.is_empty() {
            ModelKind::ALL.to_vec()
        } else {
            args.models
        },
        runs: args.runs,
        epochs: args.epochs,
        batch_size: args.batch_size,
        adam_learning_rate: args.adam_lr,
        sgd_learning_rate: args.sgd_lr,
        gradient_clip: args.clip,
        master_seed: args.master_seed,
        embed: EmbedConfig {
            dim: args.embed_dim,
            lag: args.lag,
            horizon: args.horizon,
            train_frac: args.train_frac,
            max_points: args.max_points,
            scale_fit: match args.scale_fit {
                ScaleFitArg::Full => ScaleFit::Full,
                ScaleFitArg::Train => ScaleFit::Train,
            },
        },
        cell_update: match args.cell_update {
            CellUpdateArg::Standard => CellUpdate::Standard,
            CellUpdateArg::Squashed => CellUpdate::Squashed,
        },
        ci_method: match args.ci {
            CiArg::StudentT => CiMethod::StudentT,
            CiArg::Normal => CiMethod::Normal,
        },
    };
    let options = RunOptions {
        data_dir: args.data_dir,
        workers: args.workers,
        checkpoint_dir: args.checkpoint_dir,
        record_wall_time: args.wall_time,
    };
    let report = run_experiment(&config, &options)?;
    if !report.failures.is_empty() {
        log::warn!(
            "{} run(s) failed; see \"failures\" in the report",
            report.failures.len()
        );
    }
    write_output(
        args.out.as_deref(),
        &render_report(&report, ReportFormat::Json)?,
    )
}

fn report(args: ReportArgs) -> Result<()> {
    let report = ExperimentReport::load(&args.input)?;
    let format = match args.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Markdown => ReportFormat::Markdown,
    };
    write_output(args.out.as_deref(), &render_report(&report, format)?)
}

fn predict(args: PredictArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let Some(name) = args.dataset.or(ckpt.meta.dataset.clone()) else {
        bail!("checkpoint records no dataset; pass --dataset");
    };
    let embed = ckpt.meta.embed.unwrap_or_else(|| EmbedConfig {
        dim: ckpt.model.spec().input_dim,
        horizon: ckpt.model.spec().output_dim,
        ..EmbedConfig::default()
    });
    let series = load_dataset(&name, &args.data_dir, embed.max_points)?;
    let data = prepare(&series, &embed)?;
    let set = match args.split {
        SplitArg::Train => &data.train,
        SplitArg::Test => &data.test,
    };
    let scale = args.unscaled.then_some(&data.scale);
    emit_predictions(&ckpt.model, set, &args.steps, scale, &args.out)?;
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let mut params = ChaosParams::canonical(&args.system).expect("validated by clap");
    if let Some(d) = args.discard {
        params = params.with_discard(d);
    }
    let series = generate(&params, args.n)?;
    write_csv(&series, &args.out)?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
        Command::Predict(a) => predict(a),
        Command::Gen(a) => gen(a),
    }
}
