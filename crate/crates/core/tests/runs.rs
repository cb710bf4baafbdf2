//! End-to-end runs at toy scale through the library and through the `codes` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use codes_core::harness::{parse_config, run_bench, BenchOptions, Modality, TaskStatus};
use codes_core::report::{load_run, ReportManifest};
use codes_core::tabular::{read_columns, read_records};
use codes_core::Error;

const TINY: &str = "
seed: 42
dataset:
  name: simple_ode
  sizes: {n_train: 12, n_val: 4, n_test: 5, n_timesteps: 16}
surrogates: [FCNN, LP]
hyperparameters:
  FCNN: {epochs: 2, hidden: [12]}
  LP: {epochs: 2, hidden: [12], degree: 2}
modalities:
  interpolation: {intervals: [3]}
  extrapolation: {cutoffs: [8]}
  uncertainty: {ensemble_size: 2}
";

fn opts(run_dir: PathBuf) -> BenchOptions {
    BenchOptions {
        run_dir,
        workers: Some(2),
        force: false,
        data_dir: None,
        quiet: true,
        inject_failure: None,
    }
}

#[test]
fn injected_failure_is_isolated_and_reported() {
    let cfg = parse_config(TINY).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut o = opts(tmp.path().join("run"));
    o.inject_failure = Some(Arc::new(|t| {
        t.surrogate.id() == "LP" && (t.modality == Modality::Main || t.modality == Modality::Interpolation(3))
    }));
    let summary = run_bench(&cfg, &o).unwrap();
    assert_eq!(summary.n_tasks, 8);
    assert_eq!(summary.exit_code(), 2);
    assert!(summary.failures.iter().any(|(label, _)| label == "LP/main"));

    let report = load_run(&o.run_dir).unwrap();
    let failed: Vec<_> = report.failed().map(|c| c.task.label()).collect();
    assert!(failed.contains(&"LP/main".to_string()) && failed.contains(&"LP/interp_3".to_string()));
    assert!(report.index.tasks.iter().filter(|t| t.status == TaskStatus::Completed).count() >= 5);
    let md = fs::read_to_string(o.run_dir.join("report.md")).unwrap();
    assert!(md.contains("failed") && md.contains("Failed cells") && md.contains("LP/main"));
    // The FCNN column is still complete.
    let fcnn = report.cell(codes_core::surrogates::SurrogateKind::FullyConnected, Modality::Main).unwrap();
    assert!(fcnn.metrics.as_ref().unwrap().pcc_uq.is_some());
}

#[test]
fn existing_run_dir_needs_force() {
    let cfg = parse_config(TINY).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut o = opts(tmp.path().join("run"));
    run_bench(&cfg, &o).unwrap();
    assert!(matches!(run_bench(&cfg, &o), Err(Error::RunExists(_))));
    o.force = true;
    assert_eq!(run_bench(&cfg, &o).unwrap().exit_code(), 0);
}

fn svg_points(svg: &str) -> usize {
    let mut n = svg.matches("<circle ").count();
    for part in svg.split("points=\"").skip(1) {
        n += part.split('"').next().unwrap().split_whitespace().count();
    }
    n
}

#[test]
fn plot_csvs_hold_the_plotted_numbers() {
    let cfg = parse_config(TINY).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let o = opts(tmp.path().join("run"));
    run_bench(&cfg, &o).unwrap();
    let manifest: ReportManifest =
        serde_json::from_str(&fs::read_to_string(o.run_dir.join("manifest.json")).unwrap()).unwrap();
    let plots: Vec<_> = manifest.files.iter().filter(|f| f.path.ends_with(".svg")).collect();
    assert!(plots.len() >= 10, "{} plots", plots.len());
    for entry in plots {
        let svg = fs::read_to_string(o.run_dir.join(&entry.path)).unwrap();
        let data = entry.data.as_ref().expect("every plot has a data file");
        let (header, rows) = read_records(&o.run_dir.join(data)).unwrap();
        assert!(!rows.is_empty(), "{data} is empty");
        match header[0].as_str() {
            "series" => assert_eq!(svg_points(&svg), rows.len(), "{}", entry.path),
            // Background and frame come first.
            "label" => assert_eq!(svg.matches("<rect ").count() - 2, rows.len(), "{}", entry.path),
            "x_lo" => assert!(svg.matches("<rect ").count() > rows.len(), "{}", entry.path),
            other => panic!("unexpected header {other} in {data}"),
        }
    }

    // The error-over-time plot data is exactly the cell's series.
    let (_, cell) = read_columns(&o.run_dir.join("FCNN/main/error_over_time.csv")).unwrap();
    let (_, plotted) = read_records(&o.run_dir.join("plots/error_over_time_FCNN.csv")).unwrap();
    let mean: Vec<f64> = plotted.iter().filter(|r| r[0] == "mean").map(|r| r[2].parse().unwrap()).collect();
    let expected: Vec<f64> = cell[1].iter().copied().filter(|v| *v > 0.0).collect();
    assert_eq!(mean, expected);
}

fn codes(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_codes"));
    cmd.current_dir(dir).env_remove("CODES_DATA_DIR");
    cmd
}

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn cli_gen() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = codes(tmp.path()).args(["gen", "bogus"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown dataset"));

    let args = ["gen", "simple_ode", "--seed", "42", "--n-train", "6", "--n-val", "2", "--n-test", "2"];
    let a = codes(tmp.path()).args(args).args(["--out", "a.codesds"]).output().unwrap();
    assert!(a.status.success());
    assert!(stdout(&a).contains("6 train / 2 val / 2 test, 100 timesteps, 5 quantities"));
    codes(tmp.path()).args(args).args(["--out", "b.codesds"]).status().unwrap();
    assert_eq!(fs::read(tmp.path().join("a.codesds")).unwrap(), fs::read(tmp.path().join("b.codesds")).unwrap());

    // Without --out the file lands in CODES_DATA_DIR.
    let data = tmp.path().join("data");
    let st = codes(tmp.path()).args(args).env("CODES_DATA_DIR", &data).status().unwrap();
    assert!(st.success() && data.join("simple_ode.codesds").is_file());
}

#[test]
fn cli_validate_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("tiny.yaml"), TINY).unwrap();
    let out = codes(tmp.path()).args(["validate-config", "--config", "tiny.yaml"]).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).trim_end().ends_with("8 tasks"));
    assert!(stdout(&out).contains("LP") && stdout(&out).contains("interp_3"));

    fs::write(tmp.path().join("neg.yaml"), "seed: -4\ndataset: simple_ode\nsurrogates: [FCNN]\n").unwrap();
    let out = codes(tmp.path()).args(["validate-config", "--config", "neg.yaml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`seed`"));

    // A modalities-only change moves the count by the formula: two more cutoffs on two surrogates.
    fs::write(tmp.path().join("more.yaml"), TINY.replace("cutoffs: [8]", "cutoffs: [4, 8, 12]")).unwrap();
    let out = codes(tmp.path()).args(["validate-config", "--config", "more.yaml", "--json"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["n_tasks"], 12);
}

#[test]
fn cli_bench_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("tiny.yaml"), TINY).unwrap();
    let data = tmp.path().join("data");
    let gen = codes(tmp.path())
        .args(["gen", "simple_ode", "--seed", "1", "--n-train", "12", "--n-val", "4", "--n-test", "5"])
        .args(["--n-timesteps", "16"])
        .env("CODES_DATA_DIR", &data)
        .status()
        .unwrap();
    assert!(gen.success());

    let bench = |extra: &[&str]| {
        codes(tmp.path())
            .args(["bench", "--config", "tiny.yaml", "--out", "runs", "--run-id", "r", "--quiet", "--json"])
            .args(extra)
            .env("CODES_DATA_DIR", &data)
            .output()
            .unwrap()
    };
    let out = bench(&[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["n_tasks"], 8);
    assert_eq!(summary["n_failed"], 0);

    let run = tmp.path().join("runs/r");
    let index: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("run_index.json")).unwrap()).unwrap();
    assert!(index["dataset"].to_string().contains("simple_ode.codesds"), "dataset came from CODES_DATA_DIR");

    let again = bench(&[]);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert_eq!(bench(&["--force", "--seed", "7"]).status.code(), Some(0));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("FCNN/main/metrics.json")).unwrap()).unwrap();
    let seed7 = codes_core::harness::derive_seed(7, codes_core::surrogates::SurrogateKind::FullyConnected, Modality::Main);
    assert_eq!(metrics["seed"], seed7);

    let out = codes(tmp.path()).args(["report", "runs/r", "--out", "rendered"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(run.join("report.csv")).unwrap(),
        fs::read(tmp.path().join("rendered/report.csv")).unwrap()
    );
    assert!(tmp.path().join("rendered/plots/error_over_time_FCNN.svg").is_file());
}
