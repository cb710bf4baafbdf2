//! Run configuration, task expansion, per-task seeds, training subsets and the worker pool.

mod bench;
mod config;
mod pool;
mod tasks;

pub use bench::{
    default_run_id, resolve_dataset, run_bench, write_heatmap, BenchOptions, BenchSummary, DatasetSource,
    FailurePredicate, PredictionsMeta, RunIndex, TaskRecord, TaskStatus, DATASET_EXTENSION, DATA_DIR_ENV,
};
pub use config::{
    parse_config, BatchSizes, BenchmarkConfig, DatasetConfig, DatasetConfigFields, EvaluationToggles, Extrapolation,
    Interpolation, Modalities, Sparse, Uncertainty, DEFAULT_ENSEMBLE_SIZE,
};
pub use pool::run_tasks;
pub use tasks::{
    derive_seed, expand_tasks, modality_list, subset_extrapolation, subset_interpolation, subset_sparse, Modality,
    Task,
};

pub(crate) use bench::write_json;
