use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array3, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::BenchmarkConfig;
use super::pool::run_tasks;
use super::tasks::{expand_tasks, Modality, Task};
use crate::dataset::{load_dataset, DatasetCounts, NormalizationTransform, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::metrics::{
    data_gradients, ensemble_stats, error_density, error_metrics, error_over_time, gradient_correlation,
    histogram2d, mae_over_time, mean_over_time, measure_inference, uq_correlation, CellMetrics, CellTiming,
    Histogram2d, HISTOGRAM_BINS,
};
use crate::odegen::{generate_dataset, GenerationSizes, OdeSystem, SystemId};
use crate::surrogates::{train, EpochRecord, Predictor, SurrogateModel};
use crate::tabular::{fmt_f64, write_columns, write_records};

pub const DATA_DIR_ENV: &str = "CODES_DATA_DIR";
pub const DATASET_EXTENSION: &str = "codesds";
const DENSITY_POINTS: usize = 200;

/// Where a run's dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    File { path: PathBuf },
    Generated { system: SystemId, seed: u64, sizes: GenerationSizes },
}

/// Resolves the configured dataset: explicit path, then `<data_dir>/<name>.codesds`,
/// then in-memory generation for the built-in systems.
pub fn resolve_dataset(cfg: &BenchmarkConfig, data_dir: Option<&Path>) -> Result<(TrajectoryDataset, DatasetSource)> {
    if let Some(path) = &cfg.dataset.path {
        return Ok((load_dataset(path)?, DatasetSource::File { path: path.clone() }));
    }
    let name = cfg.dataset.name.as_deref().expect("validated config names a dataset");
    if let Some(dir) = data_dir {
        let path = dir.join(format!("{name}.{DATASET_EXTENSION}"));
        if path.is_file() {
            return Ok((load_dataset(&path)?, DatasetSource::File { path }));
        }
    }
    let system: SystemId = name.parse()?;
    let sizes = cfg.dataset.sizes.unwrap_or_default();
    let seed = cfg.dataset.seed.unwrap_or(cfg.seed);
    let ds = generate_dataset(&OdeSystem::new(system), sizes, seed)?;
    Ok((ds, DatasetSource::Generated { system, seed, sizes }))
}

/// Predicate marking tasks that should fail on purpose; used to exercise partial-failure paths.
pub type FailurePredicate = Arc<dyn Fn(&Task) -> bool + Send + Sync>;

#[derive(Clone, Default)]
pub struct BenchOptions {
    pub run_dir: PathBuf,
    /// Overrides the config's worker count.
    pub workers: Option<usize>,
    pub force: bool,
    pub data_dir: Option<PathBuf>,
    pub quiet: bool,
    pub inject_failure: Option<FailurePredicate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    #[serde(flatten)]
    pub task: Task,
    pub status: TaskStatus,
    pub error: Option<String>,
}

/// Contents of `run_index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunIndex {
    pub run_id: String,
    pub config: BenchmarkConfig,
    pub dataset: DatasetSource,
    pub counts: DatasetCounts,
    pub labels: Vec<String>,
    pub time_grid: Vec<f64>,
    pub tasks: Vec<TaskRecord>,
}

impl RunIndex {
    pub const FILE: &'static str = "run_index.json";

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(Self::FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub run_dir: PathBuf,
    pub n_tasks: usize,
    pub failures: Vec<(String, String)>,
}

impl BenchSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() { 0 } else { 2 }
    }
}

/// Stable run identifier derived from the config contents.
pub fn default_run_id(cfg: &BenchmarkConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
    format!("seed{}-{hex}", cfg.seed)
}

struct TaskOutput {
    /// Kept only for main cells, which are timed after training.
    model: Option<SurrogateModel>,
    /// Kept only for ensemble members, including the main cell.
    predictions: Option<Array3<f64>>,
    metrics: CellMetrics,
    train_time_s: f64,
}

/// Expands, trains, evaluates and reports a whole benchmark run.
pub fn run_bench(cfg: &BenchmarkConfig, opts: &BenchOptions) -> Result<BenchSummary> {
    cfg.validate()?;
    let (ds, source) = resolve_dataset(cfg, opts.data_dir.as_deref())?;
    cfg.validate_against(ds.n_timesteps())?;
    // Resolve every spec up front so bad hyperparameters fail before any training.
    for &kind in &cfg.surrogates {
        cfg.surrogate_spec(kind, ds.n_quantities())?;
    }
    let tasks = expand_tasks(cfg);
    prepare_run_dir(&opts.run_dir, opts.force)?;
    let workers = opts.workers.unwrap_or(cfg.workers);
    let n = tasks.len();
    let progress = |msg: String| {
        if !opts.quiet {
            eprintln!("{msg}");
        }
    };

    let results = run_tasks(&tasks, workers, |i, task| {
        progress(format!("[{}/{n}] {} started", i + 1, task.label()));
        let start = Instant::now();
        let out = execute_task(cfg, &ds, task, opts);
        match &out {
            Ok(o) => progress(format!(
                "[{}/{n}] {} done in {:.1}s (test MAE {:.3e})",
                i + 1,
                task.label(),
                start.elapsed().as_secs_f64(),
                o.metrics.mae
            )),
            Err(e) => progress(format!("[{}/{n}] {} FAILED: {e}", i + 1, task.label())),
        }
        out
    })?;

    let grid = ds.time_grid();
    let mut outputs: Vec<Option<TaskOutput>> = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for (task, res) in tasks.iter().zip(results) {
        match res {
            Ok(o) => {
                records.push(TaskRecord {
                    task: task.clone(),
                    status: TaskStatus::Completed,
                    error: None,
                });
                outputs.push(Some(o));
            }
            Err(e) => {
                failures.push((task.label(), e.to_string()));
                records.push(TaskRecord {
                    task: task.clone(),
                    status: TaskStatus::Failed,
                    error: Some(e.to_string()),
                });
                outputs.push(None);
            }
        }
    }

    if let Some(n_members) = cfg.ensemble_size() {
        for &kind in &cfg.surrogates {
            evaluate_ensemble(cfg, &ds, &opts.run_dir, &tasks, &mut outputs, kind, n_members, &mut failures)?;
        }
    }

    for (task, out) in tasks.iter().zip(&outputs) {
        let Some(out) = out else { continue };
        let dir = opts.run_dir.join(&task.dir);
        write_json(&dir.join("metrics.json"), &out.metrics)?;
        let inference = match (&out.model, cfg.evaluation.timing) {
            (Some(model), true) => {
                progress(format!("timing {}", task.label()));
                Some(measure_inference(model as &dyn Predictor, ds.test.index_axis(Axis(1), 0), &grid)?)
            }
            _ => None,
        };
        write_json(
            &dir.join("timing.json"),
            &CellTiming {
                train_time_s: out.train_time_s,
                inference,
            },
        )?;
    }

    let index = RunIndex {
        run_id: opts
            .run_dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        config: cfg.clone(),
        dataset: source,
        counts: ds.counts.clone(),
        labels: ds.labels_or_default(),
        time_grid: grid,
        tasks: records,
    };
    write_json(&opts.run_dir.join(RunIndex::FILE), &index)?;
    crate::report::write_report(&opts.run_dir)?;
    Ok(BenchSummary {
        run_dir: opts.run_dir.clone(),
        n_tasks: n,
        failures,
    })
}

fn prepare_run_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let empty = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_none();
        if !empty {
            if !force {
                return Err(Error::RunExists(dir.to_path_buf()));
            }
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn execute_task(cfg: &BenchmarkConfig, ds: &TrajectoryDataset, task: &Task, opts: &BenchOptions) -> Result<TaskOutput> {
    let mut spec = cfg.surrogate_spec(task.surrogate, ds.n_quantities())?;
    if let Modality::Batch(b) = task.modality {
        spec.training.batch_size = b;
    }
    let subset = task.subset(ds)?;
    let grid = ds.time_grid();
    let transform = NormalizationTransform::fit(subset.select(ds)?.view(), &grid, cfg.dataset.log10)?;
    let mut model = SurrogateModel::build(spec, task.seed)?.with_transform(transform)?;
    if opts.inject_failure.as_ref().is_some_and(|f| f(task)) {
        return Err(Error::Divergence {
            epoch: 0,
            detail: "failure injected for testing".into(),
        });
    }

    let start = Instant::now();
    let history = train(&mut model, ds, &subset, task.seed)?;
    let train_time_s = start.elapsed().as_secs_f64();

    let dir = opts.run_dir.join(&task.dir);
    model.save(dir.join("checkpoint"))?;
    write_history(&dir.join("history.csv"), &history)?;

    let y0 = ds.test.index_axis(Axis(1), 0);
    let pred = model.predict(y0, &grid)?;
    write_json(&dir.join("predictions_meta.json"), &PredictionsMeta::of(&pred))?;
    let errs = error_metrics(pred.view(), ds.test.view())?;

    let eot = error_over_time(pred.view(), ds.test.view())?;
    let mae_t = mae_over_time(pred.view(), ds.test.view())?;
    write_columns(
        &dir.join("error_over_time.csv"),
        &strings(&["time", "mean_relative_error", "median_relative_error", "mae"]),
        &[grid.clone(), eot.mean, eot.median, mae_t],
    )?;

    let is_main = task.modality == Modality::Main;
    let pcc_gradient = if is_main && cfg.evaluation.gradients_pcc {
        Some(gradient_correlation(pred.view(), ds.test.view(), &grid)?)
    } else {
        None
    };
    if is_main && cfg.evaluation.heatmaps {
        let g: Vec<f64> = data_gradients(ds.test.view(), &grid)?.iter().copied().collect();
        let e: Vec<f64> = pred.iter().zip(ds.test.iter()).map(|(p, y)| (p - y).abs()).collect();
        write_heatmap(&dir.join("heatmap_gradient.csv"), &histogram2d(&g, &e, HISTOGRAM_BINS)?)?;
    }
    if is_main && cfg.evaluation.distributions {
        let d = error_density(pred.view(), ds.test.view(), DENSITY_POINTS)?;
        let mut header = vec!["log10_relative_error".to_string()];
        header.extend(ds.labels_or_default());
        header.push("all".into());
        let mut cols = vec![d.grid];
        cols.extend(d.per_quantity);
        cols.push(d.pooled);
        write_columns(&dir.join("error_density.csv"), &header, &cols)?;
    }

    let last = history.last();
    let metrics = CellMetrics {
        surrogate: task.surrogate.id().into(),
        modality: task.modality.tag(),
        seed: task.seed,
        epochs: model.epochs_trained,
        param_count: model.param_count(),
        n_train_samples: subset.sample_indices.len(),
        n_train_timesteps: subset.time_indices.len(),
        mse: errs.mse,
        mae: errs.mae,
        mre: errs.mre,
        final_train_loss: last.map(|h| h.train_loss),
        final_val_loss: last.map(|h| h.val_loss),
        pcc_gradient,
        ensemble_size: None,
        mean_uncertainty: None,
        pcc_uq: None,
    };
    let keeps_predictions = matches!(task.modality, Modality::Main | Modality::Ensemble(_));
    Ok(TaskOutput {
        model: is_main.then_some(model),
        predictions: keeps_predictions.then_some(pred),
        metrics,
        train_time_s,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_ensemble(
    cfg: &BenchmarkConfig,
    ds: &TrajectoryDataset,
    run_dir: &Path,
    tasks: &[Task],
    outputs: &mut [Option<TaskOutput>],
    kind: crate::surrogates::SurrogateKind,
    n_members: usize,
    failures: &mut Vec<(String, String)>,
) -> Result<()> {
    let is_member = |t: &Task| t.surrogate == kind && matches!(t.modality, Modality::Main | Modality::Ensemble(_));
    let member_idx: Vec<usize> = (0..tasks.len()).filter(|&i| is_member(&tasks[i])).collect();
    let Some(&main_idx) = member_idx.iter().find(|&&i| tasks[i].modality == Modality::Main) else {
        return Ok(());
    };
    if outputs[main_idx].is_none() {
        return Ok(());
    }
    let preds: Vec<Array3<f64>> = member_idx
        .iter()
        .filter_map(|&i| outputs[i].as_ref().and_then(|o| o.predictions.clone()))
        .collect();
    if preds.len() < n_members {
        failures.push((
            format!("{kind}/uncertainty"),
            format!("only {} of {n_members} ensemble members completed", preds.len()),
        ));
        if preds.len() < 2 {
            return Ok(());
        }
    }
    let stats = ensemble_stats(&preds)?;
    let grid = ds.time_grid();
    let dir = run_dir.join(&tasks[main_idx].dir);
    let pcc_uq = if cfg.evaluation.uq_pcc {
        Some(uq_correlation(&stats, ds.test.view())?)
    } else {
        None
    };
    let abs_err = (&stats.mean - &ds.test).mapv(f64::abs);
    write_columns(
        &dir.join("uncertainty_over_time.csv"),
        &strings(&["time", "mean_sigma", "mae_ensemble_mean"]),
        &[grid, mean_over_time(stats.sigma.view()), mean_over_time(abs_err.view())],
    )?;
    if cfg.evaluation.heatmaps {
        let s: Vec<f64> = stats.sigma.iter().copied().collect();
        let e: Vec<f64> = abs_err.iter().copied().collect();
        write_heatmap(&dir.join("heatmap_uq.csv"), &histogram2d(&s, &e, HISTOGRAM_BINS)?)?;
    }
    let main = outputs[main_idx].as_mut().expect("checked above");
    main.metrics.ensemble_size = Some(preds.len());
    main.metrics.mean_uncertainty = Some(stats.mean_uncertainty);
    main.metrics.pcc_uq = pcc_uq;
    Ok(())
}

fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let cols = [
        history.iter().map(|h| h.epoch as f64).collect(),
        history.iter().map(|h| h.lr).collect(),
        history.iter().map(|h| h.train_loss).collect(),
        history.iter().map(|h| h.val_loss).collect::<Vec<f64>>(),
    ];
    write_columns(path, &strings(&["epoch", "lr", "train_loss", "val_loss"]), &cols)
}

/// Non-empty histogram cells with their bin bounds.
pub fn write_heatmap(path: &Path, h: &Histogram2d) -> Result<()> {
    let mut rows = Vec::new();
    for xi in 0..h.bins {
        for yi in 0..h.bins {
            let c = h.get(xi, yi);
            if c > 0 {
                rows.push(vec![
                    xi.to_string(),
                    yi.to_string(),
                    fmt_f64(h.x_edges[xi]),
                    fmt_f64(h.x_edges[xi + 1]),
                    fmt_f64(h.y_edges[yi]),
                    fmt_f64(h.y_edges[yi + 1]),
                    c.to_string(),
                ]);
            }
        }
    }
    write_records(path, &strings(&["x_bin", "y_bin", "x_lo", "x_hi", "y_lo", "y_hi", "count"]), &rows)
}

/// Summary of a test-set prediction tensor; the tensor itself is not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionsMeta {
    pub shape: Vec<usize>,
    pub sha256: String,
    pub min: f64,
    pub max: f64,
}

impl PredictionsMeta {
    pub fn of(pred: &Array3<f64>) -> Self {
        let mut hasher = Sha256::new();
        for v in pred.iter() {
            hasher.update(v.to_le_bytes());
        }
        Self {
            shape: pred.shape().to_vec(),
            sha256: hasher.finalize().iter().map(|b| format!("{b:02x}")).collect(),
            min: pred.iter().cloned().fold(f64::INFINITY, f64::min),
            max: pred.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}
