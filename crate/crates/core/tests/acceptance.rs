//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and exits
//! non-zero if any failed. Built with `harness = false`, so the lines always show.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread::sleep;
use std::time::{Duration, Instant};

use ndarray::{Array3, ArrayView2, Axis};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};

use codes_core::dataset::{NormalizationTransform, TrajectoryDataset};
use codes_core::harness::{
    expand_tasks, parse_config, run_bench, subset_extrapolation, BenchOptions, BenchmarkConfig, BatchSizes,
    Extrapolation, Interpolation, Modality, Sparse, Uncertainty,
};
use codes_core::metrics::{
    data_gradients, ensemble_stats, error_metrics, error_over_time, histogram2d, mae_over_time,
    mean_and_population_std, measure_inference, pearson, uq_correlation, CellMetrics, Correlation, MRE_EPS,
    TIMING_REPEATS, TIMING_WARMUP,
};
use codes_core::odegen::{generate_dataset, GenerationSizes, OdeSystem, SystemId};
use codes_core::report::load_run;
use codes_core::surrogates::{train, Predictor, SurrogateKind, SurrogateModel, SurrogateSpec};
use codes_core::tabular::read_columns;
use codes_core::Error;
use common::gradcheck::{max_gradient_error, GRADIENT_SEEDS, GRADIENT_TOLERANCE};
use common::oracles::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load_config(name: &str) -> Result<BenchmarkConfig, String> {
    let text = fs::read_to_string(configs_dir().join(name)).map_err(err)?;
    parse_config(&text).map_err(err)
}

fn quiet_opts(run_dir: PathBuf, workers: usize) -> BenchOptions {
    BenchOptions {
        run_dir,
        workers: Some(workers),
        force: false,
        data_dir: None,
        quiet: true,
        inject_failure: None,
    }
}

fn c1_param_counts() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for (kind, target) in [
        (SurrogateKind::FullyConnected, 184429usize),
        (SurrogateKind::MultiOnet, 558970),
        (SurrogateKind::LatentPoly, 62864),
    ] {
        let spec = SurrogateSpec::default_for(kind, 29);
        let built = SurrogateModel::build(spec.clone(), 0).map_err(err)?.param_count();
        ensure(spec.param_count() == target && built == target, || {
            format!("{kind}: spec {} built {built}, expected {target}", spec.param_count())
        })?;
        parts.push(format!("{kind}={target}"));
    }
    let lnode = SurrogateModel::build(SurrogateSpec::default_for(SurrogateKind::LatentNeuralOde, 29), 0)
        .map_err(err)?
        .param_count();
    let dev = (lnode as f64 - 72368.0).abs() / 72368.0;
    ensure(dev < 0.02, || format!("LNODE {lnode} deviates {:.2}% from 72368", dev * 100.0))?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 1.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!("{}, LNODE={lnode} ({:+.2}% vs 72368)", parts.join(", "), dev * 100.0))
}

fn c2_integrator() -> Outcome {
    let sys = OdeSystem::new(SystemId::SimpleReaction);
    let grid = sys.uniform_grid(100);
    let a = simple_reaction_matrix();
    let ics = sys.sample_initial_conditions(20, 7);
    let mut worst = 0.0f64;
    for y0 in ics.rows() {
        let y0 = y0.to_vec();
        let out = sys.integrate(&y0, &grid, 1e-8, 1e-10).map_err(err)?;
        for (i, &t) in grid.iter().enumerate() {
            let exact = matvec(&expm(&scale(&a, t)), &y0);
            for (q, e) in exact.iter().enumerate() {
                worst = worst.max((out[[i, q]] - e).abs());
            }
        }
    }
    ensure(worst < 1e-8, || format!("max abs error {worst:e} >= 1e-8"))?;
    Ok(format!("max abs error {worst:.2e} over 20 ICs x 100 steps"))
}

fn c3_gradients() -> Outcome {
    let mut worst = BTreeMap::new();
    for kind in SurrogateKind::ALL {
        for seed in GRADIENT_SEEDS {
            let e = max_gradient_error(kind, seed);
            ensure(e < GRADIENT_TOLERANCE, || format!("{kind} seed {seed}: {e:e}"))?;
            let w = worst.entry(kind.id()).or_insert(0.0f64);
            *w = w.max(e);
        }
    }
    let parts: Vec<_> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    Ok(format!("worst relative error over {} seeds: {}", GRADIENT_SEEDS.len(), parts.join(", ")))
}

fn collect_files(root: &Path, select: &dyn Fn(&Path) -> bool) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if select(&p) {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism_config() -> BenchmarkConfig {
    let text = "
seed: 42
dataset:
  name: simple_ode
  sizes: {n_train: 24, n_val: 6, n_test: 8, n_timesteps: 20}
surrogates: [FCNN, MON, LNODE, LP]
hyperparameters:
  FCNN: {epochs: 4, hidden: [16, 16]}
  MON: {epochs: 4, hidden: [16], trunk_hidden: [16], outputs_per_quantity: 4}
  LNODE: {epochs: 3, hidden: [16], ode_hidden: [8], substeps: 2}
  LP: {epochs: 4, hidden: [16]}
modalities:
  interpolation: {intervals: [3]}
  extrapolation: {cutoffs: [12]}
  sparse: {factors: [2]}
  batch: {sizes: [4]}
  uncertainty: {ensemble_size: 3}
";
    parse_config(text).unwrap()
}

fn c4_determinism() -> Outcome {
    let cfg = determinism_config();
    let tmp = tempfile::tempdir().map_err(err)?;
    let select = |p: &Path| {
        let s = p.to_string_lossy();
        s.contains("/checkpoint/") || s.ends_with("metrics.json") || s.ends_with("report.csv")
    };
    let mut snapshots = Vec::new();
    for (i, workers) in [1usize, 1, 4, 4].into_iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        let summary = run_bench(&cfg, &quiet_opts(dir.clone(), workers)).map_err(err)?;
        ensure(summary.failures.is_empty(), || format!("failures: {:?}", summary.failures))?;
        snapshots.push((workers, collect_files(&dir, &select)));
    }
    let (_, reference) = &snapshots[0];
    let n_ckpt = reference.keys().filter(|k| k.to_string_lossy().contains("checkpoint")).count();
    ensure(n_ckpt > 0 && reference.contains_key(Path::new("report.csv")), || "no artifacts compared".into())?;
    for (i, (workers, snap)) in snapshots.iter().enumerate().skip(1) {
        ensure(snap.keys().eq(reference.keys()), || format!("run {i} (workers={workers}) file set differs"))?;
        for (k, v) in snap {
            ensure(reference[k] == *v, || format!("run {i} (workers={workers}): {} differs", k.display()))?;
        }
    }
    Ok(format!(
        "{} files ({n_ckpt} checkpoint files, metrics.json, report.csv) identical across 2 runs each at workers 1 and 4",
        reference.len()
    ))
}

fn expected_count(cfg: &BenchmarkConfig) -> usize {
    let m = &cfg.modalities;
    let per = 1
        + m.interpolation.as_ref().filter(|x| x.enabled).map_or(0, |x| x.intervals.len())
        + m.extrapolation.as_ref().filter(|x| x.enabled).map_or(0, |x| x.cutoffs.len())
        + m.sparse.as_ref().filter(|x| x.enabled).map_or(0, |x| x.factors.len())
        + m.batch.as_ref().filter(|x| x.enabled).map_or(0, |x| x.sizes.len())
        + m.uncertainty.as_ref().filter(|x| x.enabled).map_or(0, |x| x.ensemble_size - 1);
    cfg.surrogates.len() * per
}

fn distinct(max: usize, lo: usize, hi: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::btree_set(lo..hi, 0..max).prop_map(|s| s.into_iter().collect())
}

fn c5_task_expansion() -> Outcome {
    let study = load_config("study.yaml")?;
    let n = expand_tasks(&study).len();
    ensure(n == 96, || format!("study config expands to {n} tasks"))?;

    let mut runner = TestRunner::new(PropConfig {
        cases: 256,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (
        proptest::sample::subsequence(SurrogateKind::ALL.to_vec(), 1..=4),
        distinct(6, 2, 99),
        distinct(6, 1, 99),
        distinct(5, 2, 40),
        distinct(5, 1, 64),
        proptest::option::of(2usize..8),
    );
    runner
        .run(&strategy, |(surrogates, intervals, cutoffs, factors, sizes, ensemble)| {
            let mut cfg = BenchmarkConfig::minimal(42, "simple_ode", surrogates);
            let m = &mut cfg.modalities;
            if !intervals.is_empty() {
                m.interpolation = Some(Interpolation { enabled: true, intervals });
            }
            if !cutoffs.is_empty() {
                m.extrapolation = Some(Extrapolation { enabled: true, cutoffs });
            }
            if !factors.is_empty() {
                m.sparse = Some(Sparse { enabled: true, factors });
            }
            if !sizes.is_empty() {
                m.batch = Some(BatchSizes { enabled: true, sizes });
            }
            m.uncertainty = ensemble.map(|ensemble_size| Uncertainty {
                enabled: true,
                ensemble_size,
            });
            cfg.validate().unwrap();
            prop_assert_eq!(expand_tasks(&cfg).len(), expected_count(&cfg));
            Ok(())
        })
        .map_err(err)?;
    Ok("study config -> 96 tasks; count formula holds on 256 random modality lists".into())
}

fn c6_training_sanity() -> Outcome {
    let start = Instant::now();
    let cfg = load_config("training_sanity.yaml")?;
    let tmp = tempfile::tempdir().map_err(err)?;
    let run_dir = tmp.path().join("run");
    let summary = run_bench(&cfg, &quiet_opts(run_dir.clone(), 1)).map_err(err)?;
    ensure(summary.failures.is_empty(), || format!("failures: {:?}", summary.failures))?;
    let report = load_run(&run_dir).map_err(err)?;
    ensure(report.index.counts.n_train == 500, || format!("n_train = {}", report.index.counts.n_train))?;
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for kind in SurrogateKind::ALL {
        let cell = report.cell(kind, Modality::Main).ok_or("missing main cell")?;
        let (_, cols) = read_columns(&report.cell_dir(cell).join("history.csv")).map_err(err)?;
        let val = &cols[3];
        let ratio = val[0] / val[val.len() - 1];
        parts.push(format!("{kind} x{ratio:.1}"));
        if !(ratio >= 10.0) {
            failures.push(format!("{kind} val MSE reduced only x{ratio:.2}"));
        }
        if kind == SurrogateKind::FullyConnected {
            let mre = cell.metrics.as_ref().ok_or("no FCNN metrics")?.mre;
            parts.push(format!("FCNN MRE {:.2}%", mre * 100.0));
            if !(mre < 0.10) {
                failures.push(format!("FCNN MRE {:.2}% >= 10%", mre * 100.0));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    parts.push(format!("{elapsed:.0}s"));
    if elapsed > 900.0 {
        failures.push(format!("took {elapsed:.0}s > 900s"));
    }
    if failures.is_empty() {
        Ok(format!("val MSE reduction from epoch 1: {}", parts.join(", ")))
    } else {
        Err(format!("{} ({})", failures.join("; "), parts.join(", ")))
    }
}

fn c7_extrapolation() -> Outcome {
    let cfg = load_config("training_sanity.yaml")?;
    let ds = generate_dataset(&OdeSystem::new(SystemId::SimpleOde), GenerationSizes::default(), cfg.seed)
        .map_err(err)?;
    let cutoff = 50;
    let subset = subset_extrapolation(&ds, cutoff).map_err(err)?;
    let grid = ds.time_grid();
    let sub_grid: Vec<f64> = subset.time_indices.iter().map(|&i| grid[i]).collect();
    let transform = NormalizationTransform::fit(subset.select(&ds).map_err(err)?.view(), &sub_grid, true)
        .map_err(err)?;
    let spec = cfg.surrogate_spec(SurrogateKind::FullyConnected, ds.n_quantities()).map_err(err)?;
    let mut model = SurrogateModel::build(spec, 42).map_err(err)?.with_transform(transform).map_err(err)?;
    train(&mut model, &ds, &subset, 42).map_err(err)?;
    let y0 = ds.test.index_axis(Axis(1), 0).to_owned();
    let pred = model.predict(y0.view(), &grid).map_err(err)?;
    let mae = mae_over_time(pred.view(), ds.test.view()).map_err(err)?;
    let inside = mae[..=cutoff].iter().sum::<f64>() / (cutoff + 1) as f64;
    let outside = mae[cutoff + 1..].iter().sum::<f64>() / (mae.len() - cutoff - 1) as f64;
    let ratio = outside / inside;
    ensure(ratio >= 2.0, || format!("MAE beyond cutoff / within = {ratio:.2} < 2"))?;
    Ok(format!("MAE t>50 {outside:.3e} vs t<=50 {inside:.3e}, ratio {ratio:.1}"))
}

fn c8_metric_oracles() -> Outcome {
    const TOL: f64 = 1e-12;
    let mut r = rng(8);
    let mut checks = 0usize;
    for _ in 0..25 {
        let dim = (r.random_range(1..5), r.random_range(2..7), r.random_range(1..4));
        let p = random_tensor(&mut r, dim, -2.0, 2.0);
        let y = random_tensor(&mut r, dim, -2.0, 2.0);

        let m = error_metrics(p.view(), y.view()).map_err(err)?;
        let (mse, mae, mre) = brute_errors(&p, &y, MRE_EPS);
        ensure(close(m.mse, mse, TOL) && close(m.mae, mae, TOL) && close(m.mre, mre, TOL), || {
            format!("error metrics {m:?} vs ({mse}, {mae}, {mre})")
        })?;

        let series = error_over_time(p.view(), y.view()).map_err(err)?;
        let mae_t = mae_over_time(p.view(), y.view()).map_err(err)?;
        for (t, &(a, b, c)) in brute_over_time(&p, &y, MRE_EPS).iter().enumerate() {
            ensure(
                close(series.mean[t], a, TOL) && close(series.median[t], b, TOL) && close(mae_t[t], c, TOL),
                || format!("per-time series differ at t={t}"),
            )?;
        }

        let members: Vec<Array3<f64>> = (0..r.random_range(2..6)).map(|_| random_tensor(&mut r, dim, 0.0, 1.0)).collect();
        let stats = ensemble_stats(&members).map_err(err)?;
        ensure(stats.sigma.iter().zip(brute_sigma(&members).iter()).all(|(a, b)| close(*a, *b, TOL)), || {
            "ensemble sigma differs".into()
        })?;

        let x: Vec<f64> = p.iter().copied().collect();
        let z: Vec<f64> = y.iter().copied().collect();
        if x.len() >= 2 {
            let lib = pearson(&x, &z).map_err(err)?.value();
            let oracle = brute_pearson(&x, &z);
            ensure(lib.zip(oracle).is_some_and(|(a, b)| close(a, b, TOL)), || format!("pearson {lib:?} vs {oracle:?}"))?;
        }

        let mut grid = vec![0.0];
        for _ in 1..dim.1 {
            let last = *grid.last().unwrap();
            grid.push(last + r.random_range(0.05..1.0));
        }
        let g = data_gradients(y.view(), &grid).map_err(err)?;
        ensure(g.iter().zip(brute_gradients(&y, &grid).iter()).all(|(a, b)| close(*a, *b, TOL)), || {
            "data gradients differ".into()
        })?;

        let bins = r.random_range(1..30);
        let h = histogram2d(&x, &z, bins).map_err(err)?;
        let oracle = brute_histogram(&x, &z, bins);
        for (i, row) in oracle.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                ensure(h.get(i, j) == c, || format!("histogram cell ({i}, {j}) {} vs {c}", h.get(i, j)))?;
            }
        }
        checks += 1;
    }
    let reference = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 5.0]).map_err(err)?;
    let frozen = 0.8315218406202999;
    ensure(matches!(reference, Correlation::Value(v) if (v - frozen).abs() < TOL), || {
        format!("pearson reference {reference:?} vs frozen {frozen}")
    })?;
    Ok(format!(
        "{checks} random tensors match oracles to 1e-12; pearson((1,2,3,4),(1,3,2,5)) = {}",
        reference
    ))
}

fn c9_uq_degenerate() -> Outcome {
    let mut r = rng(9);
    let member = random_tensor(&mut r, (4, 6, 3), 0.0, 2.0);
    let truth = random_tensor(&mut r, (4, 6, 3), 0.0, 2.0);
    let members = vec![member.clone(); 5];
    let stats = ensemble_stats(&members).map_err(err)?;
    ensure(stats.sigma.iter().all(|&s| s == 0.0), || "sigma not identically zero".into())?;
    ensure(stats.mean_uncertainty == 0.0, || format!("mean uncertainty {}", stats.mean_uncertainty))?;
    let pcc = uq_correlation(&stats, truth.view()).map_err(err)?;
    ensure(pcc == Correlation::Undefined, || format!("pcc_uq = {pcc:?}"))?;
    let metrics = CellMetrics {
        surrogate: "FCNN".into(),
        modality: "main".into(),
        seed: 0,
        epochs: 0,
        param_count: 0,
        n_train_samples: 0,
        n_train_timesteps: 0,
        mse: 0.0,
        mae: 0.0,
        mre: 0.0,
        final_train_loss: None,
        final_val_loss: None,
        pcc_gradient: None,
        ensemble_size: Some(5),
        mean_uncertainty: Some(stats.mean_uncertainty),
        pcc_uq: Some(pcc),
    };
    let json = serde_json::to_string(&metrics).map_err(err)?;
    ensure(json.contains("\"pcc_uq\":\"undefined\"") && !json.contains("NaN"), || json.clone())?;
    Ok("sigma == 0 everywhere, pcc_uq serialized as \"undefined\"".into())
}

struct SleepStub {
    calls: AtomicUsize,
}

impl Predictor for SleepStub {
    fn predict(&self, y0: ArrayView2<'_, f64>, t_grid: &[f64]) -> codes_core::Result<Array3<f64>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        sleep(Duration::from_millis(10));
        Ok(Array3::zeros((y0.nrows(), t_grid.len(), y0.ncols())))
    }
}

fn c10_timing() -> Outcome {
    let stub = SleepStub {
        calls: AtomicUsize::new(0),
    };
    let y0 = ndarray::Array2::zeros((3, 2));
    let timing = measure_inference(&stub, y0.view(), &[0.0, 1.0]).map_err(err)?;
    let calls = stub.calls.load(Ordering::SeqCst);
    ensure(TIMING_WARMUP == 1 && TIMING_REPEATS == 5 && calls == 6, || format!("{calls} calls"))?;
    ensure(timing.samples_ms.len() == 5, || format!("{} samples", timing.samples_ms.len()))?;
    let (mean, std) = mean_and_population_std(&timing.samples_ms);
    let n = timing.samples_ms.len() as f64;
    let pop = (timing.samples_ms.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    ensure(timing.mean_ms == mean && (timing.std_ms - pop).abs() < 1e-12 && std == timing.std_ms, || {
        "reported mean/std are not the population statistics of the samples".into()
    })?;
    ensure((10.0..=20.0).contains(&timing.mean_ms), || format!("mean {:.2} ms", timing.mean_ms))?;
    Ok(format!(
        "6 calls (1 warm-up + 5 timed), {:.2} ± {:.2} ms",
        timing.mean_ms, timing.std_ms
    ))
}

fn random_dataset(r: &mut impl rand::Rng) -> TrajectoryDataset {
    let t = r.random_range(1..7);
    let q = r.random_range(1..5);
    let (n_train, n_val, n_test) = (r.random_range(1..6), r.random_range(1..4), r.random_range(1..4));
    let mut split = |n: usize| Array3::from_shape_fn((n, t, q), |_| r.random_range(-1e3..1e3) * r.random::<f64>().powi(8));
    let (train, val, test) = (split(n_train), split(n_val), split(n_test));
    let timesteps = r
        .random_bool(0.5)
        .then(|| (0..t).map(|i| i as f64 * 0.25).collect());
    let labels = r.random_bool(0.5).then(|| (0..q).map(|i| format!("s{i}")).collect());
    TrajectoryDataset::new(train, val, test, timesteps, labels).unwrap()
}

fn c11_format_roundtrip() -> Outcome {
    let mut r = rng(11);
    let (mut truncations, mut magic) = (0, 0);
    for _ in 0..100 {
        let ds = random_dataset(&mut r);
        let bytes = ds.to_bytes().map_err(err)?;
        let back = TrajectoryDataset::from_bytes(&bytes).map_err(err)?;
        let identical = back == ds
            && [(&back.train, &ds.train), (&back.val, &ds.val), (&back.test, &ds.test)]
                .iter()
                .all(|(a, b)| a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        ensure(identical, || "round-trip changed the dataset".into())?;
        ensure(back.to_bytes().map_err(err)? == bytes, || "re-encoding differs".into())?;

        let mut bad = bytes.clone();
        let i = r.random_range(0..8);
        bad[i] ^= 0x5a;
        ensure(matches!(TrajectoryDataset::from_bytes(&bad), Err(Error::BadMagic { .. })), || {
            format!("corrupted magic byte {i} accepted")
        })?;
        magic += 1;

        let cut = r.random_range(0..bytes.len());
        ensure(TrajectoryDataset::from_bytes(&bytes[..cut]).is_err(), || {
            format!("truncation to {cut} of {} bytes accepted", bytes.len())
        })?;
        truncations += 1;
    }
    Ok(format!("100 datasets bit-identical; {magic} bad-magic and {truncations} truncated payloads rejected"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("parameter counts", c1_param_counts),
        ("integrator vs matrix exponential", c2_integrator),
        ("gradient fidelity", c3_gradients),
        ("determinism", c4_determinism),
        ("task expansion", c5_task_expansion),
        ("training sanity", c6_training_sanity),
        ("extrapolation error growth", c7_extrapolation),
        ("metric oracles", c8_metric_oracles),
        ("UQ degenerate ensemble", c9_uq_degenerate),
        ("timing protocol", c10_timing),
        ("format round-trip", c11_format_roundtrip),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {n:>2} ({name}): {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {n:>2} ({name}): {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    }
}
