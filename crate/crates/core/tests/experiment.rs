use std::path::PathBuf;

use horizon_core::bench::{
    emit_predictions, emit_report, predictions, render_report, run_experiment, ExperimentConfig,
    ExperimentReport, ReportFormat, RunOptions,
};
use horizon_core::dataset::prepare;
use horizon_core::models::load_checkpoint;
use horizon_core::seriesgen::{generate, ChaosParams};
use horizon_core::{EmbedConfig, ModelKind};

fn tiny(models: Vec<ModelKind>, runs: usize) -> ExperimentConfig {
    ExperimentConfig {
        datasets: vec!["henon".into()],
        models,
        runs,
        epochs: 2,
        embed: EmbedConfig {
            max_points: 200,
            ..EmbedConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

fn options(workers: usize) -> RunOptions {
    RunOptions {
        data_dir: PathBuf::from("data"),
        workers: Some(workers),
        ..RunOptions::default()
    }
}

#[test]
fn reports_are_identical_across_repeats_and_worker_counts() {
    let cfg = tiny(vec![ModelKind::FnnAdam, ModelKind::Lstm], 3);
    let a = run_experiment(&cfg, &options(1))
        .unwrap()
        .to_json()
        .unwrap();
    let b = run_experiment(&cfg, &options(1))
        .unwrap()
        .to_json()
        .unwrap();
    let c = run_experiment(&cfg, &options(3))
        .unwrap()
        .to_json()
        .unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let mut other = cfg.clone();
    other.master_seed += 1;
    assert_ne!(
        a,
        run_experiment(&other, &options(1))
            .unwrap()
            .to_json()
            .unwrap()
    );
}

#[test]
fn report_structure_and_json_round_trip() {
    let cfg = tiny(ModelKind::ALL.to_vec(), 2);
    let report = run_experiment(&cfg, &options(2)).unwrap();
    assert_eq!(report.schema_version, 1);
    assert_eq!(report.cells.len(), 7);
    assert_eq!(report.runs.len(), 14);
    assert!(report.failures.is_empty());
    for c in &report.cells {
        let t = c.test.as_ref().unwrap();
        let ci = t.ci_half_width.as_ref().unwrap();
        assert!(ci.iter().all(|&c| c >= 0.0));
        for ((lo, mean), hi) in t.min.iter().zip(&t.mean).zip(&t.max) {
            assert!(lo <= mean && mean <= hi);
        }
    }
    for r in &report.runs {
        let lo = r.test.rmse.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = r.test.rmse.iter().copied().fold(0.0, f64::max);
        assert!(lo - 1e-12 <= r.overall_test && r.overall_test <= hi + 1e-12);
        assert!(r.wall_seconds.is_none());
    }
    let ranks = report.ranks.as_ref().unwrap();
    let mut row = ranks.ranks[0].clone();
    row.sort_unstable();
    assert_eq!(row[0], 1);
    for (i, &r) in row.iter().enumerate() {
        // tied-min ranks never exceed the position they would take untied
        assert!(r >= 1 && r <= i + 1);
    }

    let back = ExperimentReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);

    let md = render_report(&report, ReportFormat::Markdown).unwrap();
    let section: Vec<&str> = md
        .split("### ")
        .nth(1)
        .unwrap()
        .lines()
        .filter(|l| l.starts_with('|'))
        .collect();
    // header + separator + Train, Test, Step-1..Step-10
    assert_eq!(section.len(), 2 + 12);
    for line in &section[2..] {
        assert_eq!(line.matches(" | ").count(), 7, "{line}");
    }
    assert!(section[2].starts_with("| Train |") && section[13].starts_with("| Step-10 |"));

    let csv = render_report(&report, ReportFormat::Csv).unwrap();
    assert_eq!(csv.lines().count(), 1 + 7 * 2 * 11);
}

#[test]
fn single_run_is_flagged() {
    let report = run_experiment(&tiny(vec![ModelKind::Cnn], 1), &options(1)).unwrap();
    let cell = &report.cells[0];
    assert!(cell.single_run);
    assert!(cell.test.as_ref().unwrap().ci_half_width.is_none());
    assert!(render_report(&report, ReportFormat::Markdown)
        .unwrap()
        .contains("| Step-1 | "));
}

#[test]
fn failed_runs_are_reported_not_dropped() {
    let mut cfg = tiny(vec![ModelKind::FnnSgd, ModelKind::FnnAdam], 2);
    cfg.sgd_learning_rate = 1e12;
    cfg.epochs = 20;
    let report = run_experiment(&cfg, &options(1)).unwrap();
    assert_eq!(report.failures.len(), 2);
    let bad = report.cell("henon", ModelKind::FnnSgd).unwrap();
    assert_eq!((bad.runs_ok, bad.runs_failed), (0, 2));
    assert!(bad.test.is_none());
    assert!(report.ranks.is_none());
    assert!(render_report(&report, ReportFormat::Markdown)
        .unwrap()
        .contains("failed"));
}

#[test]
fn empty_report_and_bad_paths_are_errors() {
    let mut report = run_experiment(&tiny(vec![ModelKind::FnnAdam], 2), &options(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir/r.json");
    assert!(emit_report(&report, ReportFormat::Json, &missing).is_err());
    report.cells.clear();
    assert!(render_report(&report, ReportFormat::Json).is_err());

    let mut cfg = tiny(vec![ModelKind::FnnAdam], 1);
    cfg.datasets = vec!["no_such_dataset".into()];
    assert!(run_experiment(&cfg, &options(1)).is_err());
}

#[test]
fn checkpoints_reproduce_reported_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(vec![ModelKind::EdLstm], 1);
    let opts = RunOptions {
        checkpoint_dir: Some(dir.path().to_path_buf()),
        ..options(1)
    };
    let report = run_experiment(&cfg, &opts).unwrap();
    let ckpt = load_checkpoint(dir.path().join("henon_ed_lstm_run0.ckpt")).unwrap();
    assert_eq!(ckpt.meta.seed, Some(report.runs[0].seed));

    let series = generate(&ChaosParams::henon(), 200).unwrap();
    let data = prepare(&series, &ckpt.meta.embed.unwrap()).unwrap();
    let rows = predictions(&ckpt.model, &data.test, &[1, 3, 5, 10], None).unwrap();
    assert_eq!(rows.len(), 4 * data.test.len());
    for (k, &h) in [1usize, 3, 5, 10].iter().enumerate() {
        let block = &rows[k * data.test.len()..(k + 1) * data.test.len()];
        let rmse = (block
            .iter()
            .map(|r| (r.actual - r.predicted).powi(2))
            .sum::<f64>()
            / block.len() as f64)
            .sqrt();
        assert!((rmse - report.runs[0].test.rmse[h - 1]).abs() < 1e-12);
    }

    let out = dir.path().join("pred.csv");
    emit_predictions(&ckpt.model, &data.test, &[1, 10], Some(&data.scale), &out).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "horizon,index,actual,predicted"
    );
    assert_eq!(text.lines().count(), 1 + 2 * data.test.len());
    let first: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((first[2] - series.values[first[1] as usize]).abs() < 1e-12);
    assert!(predictions(&ckpt.model, &data.test, &[11], None).is_err());
}
