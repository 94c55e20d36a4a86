//! Repeated-run experiments: per-horizon RMSE, confidence intervals, ranking and reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::dataset::{prepare, EmbedConfig, EmbeddedDataset, Prepared, ScaleParams};
use crate::error::{Error, Result};
use crate::learn::{train, OptimizerKind, TrainConfig};
use crate::models::{
    build, save_checkpoint, CellUpdate, CheckpointMeta, Model, ModelKind, ModelSpec,
};
use crate::numkit::{hash_bytes, Matrix, Rng};
use crate::seriesgen::{generate, load_csv, sniff_header, ChaosParams, TimeSeries};

pub const SCHEMA_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "HORIZON_BENCH_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub split: Split,
    pub rmse: Vec<f64>,
}

/// Column-wise RMSE: entry `h` is `sqrt(mean_i (target[i,h] - pred[i,h])^2)`.
pub fn rmse_per_horizon(pred: &Matrix, target: &Matrix) -> Result<Vec<f64>> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(
            "rmse_per_horizon",
            format!("{:?} vs {:?}", pred.shape(), target.shape()),
        ));
    }
    if pred.rows() == 0 {
        return Err(Error::InvalidArgument("rmse of zero rows".into()));
    }
    let mut sums = vec![0.0; pred.cols()];
    for (p, t) in pred.iter_rows().zip(target.iter_rows()) {
        for ((s, a), b) in sums.iter_mut().zip(p).zip(t) {
            *s += (a - b) * (a - b);
        }
    }
    let n = pred.rows() as f64;
    Ok(sums.into_iter().map(|s| (s / n).sqrt()).collect())
}

/// RMSE over every cell of the matrices, all horizons pooled.
pub fn pooled_rmse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    let per = rmse_per_horizon(pred, target)?;
    Ok((per.iter().map(|r| r * r).sum::<f64>() / per.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    StudentT,
    Normal,
}

/// Two-sided 95% critical value for `n` samples.
pub fn critical_value(n: usize, method: CiMethod) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a confidence interval needs at least 2 runs, got {n}"
        )));
    }
    let q = match method {
        CiMethod::StudentT => StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .inverse_cdf(0.975),
        CiMethod::Normal => Normal::new(0.0, 1.0)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .inverse_cdf(0.975),
    };
    Ok(q)
}

/// Sample mean and 95% CI half-width `q * s / sqrt(n)`.
pub fn mean_ci(values: &[f64], method: CiMethod) -> Result<(f64, f64)> {
    let q = critical_value(values.len(), method)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, q * var.sqrt() / n.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub model: ModelKind,
    pub run: usize,
    pub seed: u64,
    pub train: HorizonMetrics,
    pub test: HorizonMetrics,
    pub overall_train: f64,
    pub overall_test: f64,
    pub final_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl RunResult {
    fn metrics(&self, split: Split) -> &HorizonMetrics {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    fn overall(&self, split: Split) -> f64 {
        match split {
            Split::Train => self.overall_train,
            Split::Test => self.overall_test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub dataset: String,
    pub model: ModelKind,
    pub run: usize,
    pub seed: u64,
    pub error: String,
}

/// Per-horizon mean, CI half-width and range over runs, plus the pooled column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub mean: Vec<f64>,
    /// Absent when fewer than two runs succeeded.
    pub ci_half_width: Option<Vec<f64>>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub overall_mean: f64,
    pub overall_ci_half_width: Option<f64>,
}

/// Summary of one split over `runs`. A single run yields means without intervals.
pub fn aggregate(runs: &[RunResult], split: Split, method: CiMethod) -> Result<SplitSummary> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidArgument("aggregate of zero runs".into()))?;
    let h = first.metrics(split).rmse.len();
    if let Some(bad) = runs.iter().find(|r| r.metrics(split).rmse.len() != h) {
        return Err(Error::dim(
            "aggregate",
            format!(
                "run {} has {} horizons, expected {h}",
                bad.run,
                bad.metrics(split).rmse.len()
            ),
        ));
    }
    let column = |k: usize| -> Vec<f64> { runs.iter().map(|r| r.metrics(split).rmse[k]).collect() };
    let overall: Vec<f64> = runs.iter().map(|r| r.overall(split)).collect();
    let mut s = SplitSummary {
        mean: Vec::with_capacity(h),
        ci_half_width: None,
        min: Vec::with_capacity(h),
        max: Vec::with_capacity(h),
        overall_mean: overall.iter().sum::<f64>() / overall.len() as f64,
        overall_ci_half_width: None,
    };
    for k in 0..h {
        let c = column(k);
        s.mean.push(c.iter().sum::<f64>() / c.len() as f64);
        s.min.push(c.iter().copied().fold(f64::INFINITY, f64::min));
        s.max
            .push(c.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    if runs.len() >= 2 {
        let mut ci = Vec::with_capacity(h);
        for k in 0..h {
            ci.push(mean_ci(&column(k), method)?.1);
        }
        s.ci_half_width = Some(ci);
        s.overall_ci_half_width = Some(mean_ci(&overall, method)?.1);
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub dataset: String,
    pub model: ModelKind,
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub single_run: bool,
    /// Absent when every run failed.
    pub train: Option<SplitSummary>,
    pub test: Option<SplitSummary>,
}

impl CellReport {
    /// Ranking score: mean over horizons of the per-horizon test means.
    pub fn score(&self) -> Option<f64> {
        self.test
            .as_ref()
            .map(|t| t.mean.iter().sum::<f64>() / t.mean.len() as f64)
    }
}

/// Competition ranks (1-based), ties share the minimum rank and the next rank is skipped.
pub fn rank_scores(scores: &[f64]) -> Vec<usize> {
    scores
        .iter()
        .map(|s| 1 + scores.iter().filter(|o| *o < s).count())
        .collect()
}

/// Column means of a dataset-by-model rank matrix.
pub fn mean_ranks(ranks: &[Vec<usize>]) -> Vec<f64> {
    let Some(first) = ranks.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|m| ranks.iter().map(|row| row[m] as f64).sum::<f64>() / ranks.len() as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub datasets: Vec<String>,
    pub models: Vec<ModelKind>,
    /// `ranks[d][m]` for dataset `d` and model `m`.
    pub ranks: Vec<Vec<usize>>,
    pub mean_rank: Vec<f64>,
}

/// Ranks every model within each dataset of `cells`.
pub fn rank_models(
    datasets: &[String],
    models: &[ModelKind],
    cells: &[CellReport],
) -> Result<RankTable> {
    let mut ranks = Vec::with_capacity(datasets.len());
    for d in datasets {
        let mut scores = Vec::with_capacity(models.len());
        for &m in models {
            let score = cells
                .iter()
                .find(|c| &c.dataset == d && c.model == m)
                .and_then(CellReport::score)
                .ok_or_else(|| Error::MissingCell {
                    dataset: d.clone(),
                    model: m.to_string(),
                })?;
            scores.push(score);
        }
        ranks.push(rank_scores(&scores));
    }
    Ok(RankTable {
        datasets: datasets.to_vec(),
        models: models.to_vec(),
        mean_rank: mean_ranks(&ranks),
        ranks,
    })
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Run seed as a hash of `(master_seed, dataset, model, run)`.
pub fn derive_seed(master_seed: u64, dataset: &str, model: ModelKind, run: usize) -> u64 {
    let mut bytes = Vec::with_capacity(32 + dataset.len());
    bytes.extend_from_slice(&master_seed.to_le_bytes());
    bytes.extend_from_slice(dataset.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(model.as_str().as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(&(run as u64).to_le_bytes());
    hash_bytes(&bytes)
}

/// Loads a named dataset: a generator name, a path to a CSV file, or `<data_dir>/<name>.csv`.
///
/// Generated series have exactly `n` points; file series use their first column.
pub fn load_dataset(name: &str, data_dir: &Path, n: usize) -> Result<TimeSeries> {
    if let Some(params) = ChaosParams::canonical(name) {
        return generate(&params, n);
    }
    let direct = PathBuf::from(name);
    let path = if direct.extension().is_some_and(|e| e == "csv") && direct.is_file() {
        direct
    } else {
        data_dir.join(format!("{name}.csv"))
    };
    if !path.is_file() {
        return Err(Error::InvalidArgument(format!(
            "unknown dataset {name:?}: not a generator and {} does not exist",
            path.display()
        )));
    }
    let header = sniff_header(&path, 0)?;
    let mut series = load_csv(&path, 0, header)?;
    series.name = dataset_label(name);
    Ok(series)
}

fn dataset_label(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<String>,
    pub models: Vec<ModelKind>,
    pub runs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_learning_rate: f64,
    pub sgd_learning_rate: f64,
    pub gradient_clip: Option<f64>,
    pub master_seed: u64,
    pub embed: EmbedConfig,
    pub cell_update: CellUpdate,
    pub ci_method: CiMethod,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            datasets: Vec::new(),
            models: ModelKind::ALL.to_vec(),
            runs: 30,
            epochs: 1000,
            batch_size: 32,
            adam_learning_rate: 0.001,
            sgd_learning_rate: 0.01,
            gradient_clip: None,
            master_seed: 42,
            embed: EmbedConfig::default(),
            cell_update: CellUpdate::Standard,
            ci_method: CiMethod::StudentT,
        }
    }
}

impl ExperimentConfig {
    pub fn train_config(&self, kind: ModelKind, shuffle_seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::for_kind(kind, self.epochs, shuffle_seed);
        cfg.batch_size = self.batch_size;
        cfg.gradient_clip = self.gradient_clip;
        cfg.learning_rate = match cfg.optimizer {
            OptimizerKind::Adam => self.adam_learning_rate,
            OptimizerKind::Sgd => self.sgd_learning_rate,
        };
        cfg
    }

    pub fn model_spec(&self, kind: ModelKind) -> ModelSpec {
        ModelSpec::new(kind, self.embed.dim, self.embed.horizon).with_cell_update(self.cell_update)
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "runs and epochs must be >= 1".into(),
            ));
        }
        if self.datasets.is_empty() || self.models.is_empty() {
            return Err(Error::InvalidArgument(
                "no datasets or no models selected".into(),
            ));
        }
        Ok(())
    }
}

/// Settings that affect execution but never the report contents.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub data_dir: PathBuf,
    /// Worker threads; `None` reads the worker env var, then the core count.
    pub workers: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    pub record_wall_time: bool,
}

pub fn worker_count(requested: Option<usize>) -> usize {
    requested
        .or_else(|| {
            std::env::var(WORKERS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
        })
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub points: usize,
    pub scale: ScaleParams,
    pub train_samples: usize,
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetInfo>,
    pub cells: Vec<CellReport>,
    /// Absent when some cell has no successful run.
    pub ranks: Option<RankTable>,
    pub runs: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
}

impl ExperimentReport {
    pub fn cell(&self, dataset: &str, model: ModelKind) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.model == model)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format {
            what: "report",
            detail: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: ExperimentReport = serde_json::from_str(text).map_err(|e| Error::Format {
            what: "report",
            detail: e.to_string(),
        })?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Format {
                what: "report",
                detail: format!("unsupported schema_version {}", report.schema_version),
            });
        }
        Ok(report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Trains one model on prepared data and measures it. Returns the trained model too.
pub fn run_single(
    data: &Prepared,
    dataset: &str,
    kind: ModelKind,
    run: usize,
    config: &ExperimentConfig,
) -> Result<(RunResult, Model)> {
    let seed = derive_seed(config.master_seed, dataset, kind, run);
    let started = Instant::now();
    let mut model = build(&config.model_spec(kind), &mut Rng::stream(seed, 0))?;
    let shuffle_seed = Rng::stream(seed, 1).next_u64();
    let history = train(
        &mut model,
        &data.train,
        &config.train_config(kind, shuffle_seed),
    )?;
    let measure = |set: &EmbeddedDataset| -> Result<(Vec<f64>, f64)> {
        let pred = model.predict(&set.inputs)?;
        Ok((
            rmse_per_horizon(&pred, &set.targets)?,
            pooled_rmse(&pred, &set.targets)?,
        ))
    };
    let (train_rmse, overall_train) = measure(&data.train)?;
    let (test_rmse, overall_test) = measure(&data.test)?;
    let result = RunResult {
        dataset: dataset.to_string(),
        model: kind,
        run,
        seed,
        train: HorizonMetrics {
            split: Split::Train,
            rmse: train_rmse,
        },
        test: HorizonMetrics {
            split: Split::Test,
            rmse: test_rmse,
        },
        overall_train,
        overall_test,
        final_loss: history.last().copied().unwrap_or(f64::NAN),
        wall_seconds: Some(started.elapsed().as_secs_f64()),
    };
    Ok((result, model))
}

/// Runs every `(dataset, model, run)` combination and aggregates the results.
///
/// Work items run on a bounded pool and are collected in a fixed order, so
/// the report does not depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentReport> {
    config.validate()?;
    for &kind in &config.models {
        config.model_spec(kind).validate()?;
    }
    let mut prepared = Vec::with_capacity(config.datasets.len());
    let mut infos = Vec::with_capacity(config.datasets.len());
    for name in &config.datasets {
        let label = dataset_label(name);
        let series = load_dataset(name, &options.data_dir, config.embed.max_points)?;
        let data = prepare(&series, &config.embed)?;
        infos.push(DatasetInfo {
            name: label.clone(),
            points: data.series.len(),
            scale: data.scale,
            train_samples: data.train.len(),
            test_samples: data.test.len(),
        });
        prepared.push((label, data));
    }
    if let Some(dir) = &options.checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut items = Vec::new();
    for d in 0..prepared.len() {
        for &kind in &config.models {
            for run in 0..config.runs {
                items.push((d, kind, run));
            }
        }
    }
    let total = items.len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(options.workers))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let outcomes: Vec<std::result::Result<RunResult, RunFailure>> = pool.install(|| {
        items
            .par_iter()
            .map(|&(d, kind, run)| {
                let (name, data) = &prepared[d];
                let outcome =
                    run_single(data, name, kind, run, config).and_then(|(mut result, model)| {
                        if let Some(dir) = &options.checkpoint_dir {
                            let meta = CheckpointMeta {
                                spec: *model.spec(),
                                dataset: Some(name.clone()),
                                embed: Some(config.embed),
                                scale: Some(data.scale),
                                seed: Some(result.seed),
                            };
                            save_checkpoint(
                                dir.join(format!("{name}_{kind}_run{run}.ckpt")),
                                &model,
                                &meta,
                            )?;
                        }
                        if !options.record_wall_time {
                            result.wall_seconds = None;
                        }
                        Ok(result)
                    });
                match &outcome {
                    Ok(r) => log::info!(
                        "{name} {kind} run {run}/{total_runs}: test rmse {:.5}",
                        r.overall_test,
                        total_runs = config.runs
                    ),
                    Err(e) => log::warn!("{name} {kind} run {run} failed: {e}"),
                }
                outcome.map_err(|e| RunFailure {
                    dataset: name.clone(),
                    model: kind,
                    run,
                    seed: derive_seed(config.master_seed, name, kind, run),
                    error: e.to_string(),
                })
            })
            .collect()
    });
    debug_assert_eq!(outcomes.len(), total);

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => runs.push(r),
            Err(f) => failures.push(f),
        }
    }

    let names: Vec<String> = infos.iter().map(|i| i.name.clone()).collect();
    let mut cells = Vec::new();
    for name in &names {
        for &kind in &config.models {
            let ok: Vec<RunResult> = runs
                .iter()
                .filter(|r| &r.dataset == name && r.model == kind)
                .cloned()
                .collect();
            let failed = failures
                .iter()
                .filter(|f| &f.dataset == name && f.model == kind)
                .count();
            let (train, test) = if ok.is_empty() {
                (None, None)
            } else {
                (
                    Some(aggregate(&ok, Split::Train, config.ci_method)?),
                    Some(aggregate(&ok, Split::Test, config.ci_method)?),
                )
            };
            cells.push(CellReport {
                dataset: name.clone(),
                model: kind,
                runs_ok: ok.len(),
                runs_failed: failed,
                single_run: ok.len() == 1,
                train,
                test,
            });
        }
    }
    let ranks = match rank_models(&names, &config.models, &cells) {
        Ok(t) => Some(t),
        Err(Error::MissingCell { dataset, model }) => {
            log::warn!("no rank table: every run of {dataset}/{model} failed");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        datasets: infos,
        cells,
        ranks,
        runs,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidArgument(format!(
                "unknown report format {other:?}"
            ))),
        }
    }
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    if report.cells.is_empty() {
        return Err(Error::InvalidArgument("report has no cells".into()));
    }
    match format {
        ReportFormat::Json => report.to_json().map(|mut s| {
            s.push('\n');
            s
        }),
        ReportFormat::Csv => Ok(render_csv(report)),
        ReportFormat::Markdown => Ok(render_markdown(report)),
    }
}

pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    out: impl AsRef<Path>,
) -> Result<()> {
    let out = out.as_ref();
    let text = render_report(report, format)?;
    fs::write(out, text).map_err(|e| Error::io(out, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render_csv(report: &ExperimentReport) -> String {
    let mut out =
        String::from("dataset,model,split,horizon,mean,ci_half_width,runs_ok,runs_failed\n");
    for c in &report.cells {
        for (split, summary) in [("train", &c.train), ("test", &c.test)] {
            let Some(s) = summary else {
                let _ = writeln!(
                    out,
                    "{},{},{split},overall,,,0,{}",
                    c.dataset, c.model, c.runs_failed
                );
                continue;
            };
            let _ = writeln!(
                out,
                "{},{},{split},overall,{},{},{},{}",
                c.dataset,
                c.model,
                s.overall_mean,
                opt(s.overall_ci_half_width),
                c.runs_ok,
                c.runs_failed
            );
            for (h, m) in s.mean.iter().enumerate() {
                let ci = s.ci_half_width.as_ref().map(|v| v[h]);
                let _ = writeln!(
                    out,
                    "{},{},{split},{},{m},{},{},{}",
                    c.dataset,
                    c.model,
                    h + 1,
                    opt(ci),
                    c.runs_ok,
                    c.runs_failed
                );
            }
        }
    }
    out
}

fn format_cell(mean: f64, ci: Option<f64>) -> String {
    match ci {
        Some(ci) => format!("{mean:.4} ± {ci:.4}"),
        None => format!("{mean:.4}"),
    }
}

fn render_markdown(report: &ExperimentReport) -> String {
    let models = &report.config.models;
    let mut out = String::new();
    let horizon = report.config.embed.horizon;
    for info in &report.datasets {
        let _ = writeln!(out, "### {}\n", info.name);
        let header: Vec<&str> = models.iter().map(|m| m.label()).collect();
        let _ = writeln!(out, "| | {} |", header.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(models.len()));
        let cells: Vec<Option<&CellReport>> =
            models.iter().map(|&m| report.cell(&info.name, m)).collect();
        let row = |label: String, f: &dyn Fn(&CellReport) -> Option<String>| -> String {
            let vals: Vec<String> = cells
                .iter()
                .map(|c| c.and_then(f).unwrap_or_else(|| "failed".into()))
                .collect();
            format!("| {label} | {} |", vals.join(" | "))
        };
        let _ = writeln!(
            out,
            "{}",
            row("Train".into(), &|c| c.train.as_ref().map(|s| format_cell(
                s.overall_mean,
                s.overall_ci_half_width
            )))
        );
        let _ = writeln!(
            out,
            "{}",
            row("Test".into(), &|c| c.test.as_ref().map(|s| format_cell(
                s.overall_mean,
                s.overall_ci_half_width
            )))
        );
        for h in 0..horizon {
            let _ = writeln!(
                out,
                "{}",
                row(format!("Step-{}", h + 1), &|c| c.test.as_ref().map(|s| {
                    format_cell(s.mean[h], s.ci_half_width.as_ref().map(|v| v[h]))
                }))
            );
        }
        out.push('\n');
    }
    if let Some(ranks) = &report.ranks {
        out.push_str("### Rank\n\n");
        let header: Vec<&str> = ranks.models.iter().map(|m| m.label()).collect();
        let _ = writeln!(out, "| | {} |", header.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(ranks.models.len()));
        for (d, row) in ranks.datasets.iter().zip(&ranks.ranks) {
            let vals: Vec<String> = row.iter().map(|r| r.to_string()).collect();
            let _ = writeln!(out, "| {d} | {} |", vals.join(" | "));
        }
        let vals: Vec<String> = ranks.mean_rank.iter().map(|r| format!("{r:.2}")).collect();
        let _ = writeln!(out, "| Mean-Rank | {} |", vals.join(" | "));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub horizon: usize,
    /// Series index of the predicted point.
    pub index: usize,
    pub actual: f64,
    pub predicted: f64,
}

/// Actual and predicted values at each requested horizon (1-based) over `dataset`.
///
/// Values are in scaled units unless `scale` is given, in which case they are mapped back.
pub fn predictions(
    model: &Model,
    dataset: &EmbeddedDataset,
    horizons: &[usize],
    scale: Option<&ScaleParams>,
) -> Result<Vec<PredictionRow>> {
    if let Some(&h) = horizons.iter().find(|&&h| h == 0 || h > dataset.horizon) {
        return Err(Error::InvalidArgument(format!(
            "horizon {h} outside 1..={}",
            dataset.horizon
        )));
    }
    let pred = model.predict(&dataset.inputs)?;
    let unscale = |v: f64| scale.map_or(v, |s| s.invert(v));
    let mut rows = Vec::with_capacity(horizons.len() * dataset.len());
    for &h in horizons {
        for r in 0..dataset.len() {
            rows.push(PredictionRow {
                horizon: h,
                index: dataset.target_index(r, h - 1),
                actual: unscale(dataset.targets.get(r, h - 1)),
                predicted: unscale(pred.get(r, h - 1)),
            });
        }
    }
    Ok(rows)
}

/// Writes [`predictions`] as CSV with header `horizon,index,actual,predicted`.
pub fn emit_predictions(
    model: &Model,
    dataset: &EmbeddedDataset,
    horizons: &[usize],
    scale: Option<&ScaleParams>,
    out: impl AsRef<Path>,
) -> Result<()> {
    let out = out.as_ref();
    let mut text = String::from("horizon,index,actual,predicted\n");
    for r in predictions(model, dataset, horizons, scale)? {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            r.horizon, r.index, r.actual, r.predicted
        );
    }
    fs::write(out, text).map_err(|e| Error::io(out, e))
}
