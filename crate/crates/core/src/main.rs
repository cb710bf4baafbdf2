use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use codes_core::dataset::save_dataset;
use codes_core::harness::{
    default_run_id, expand_tasks, parse_config, run_bench, BenchOptions, BenchmarkConfig, EvaluationToggles, Modalities,
    DATASET_EXTENSION, DATA_DIR_ENV,
};
use codes_core::odegen::{generate_dataset, GenerationSizes, OdeSystem, SystemId};
use codes_core::report::write_report_to;
use codes_core::surrogates::SurrogateKind;
use codes_core::{Error, Result};

#[derive(Parser)]
#[command(name = "codes", version, about = "Benchmark surrogate models of coupled ODE systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file.
    Gen {
        /// lotka_volterra, simple_ode or simple_reaction.
        dataset: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output file; defaults to `$CODES_DATA_DIR/<dataset>.codesds` or `./<dataset>.codesds`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_val: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long)]
        n_timesteps: Option<usize>,
    },
    /// Train the main model of each configured surrogate, without modalities.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Restrict to these surrogates.
        #[arg(long, value_delimiter = ',')]
        surrogates: Vec<SurrogateKind>,
    },
    /// Run the full benchmark for a config: train all tasks, evaluate and report.
    Bench {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-render the table and plots of a finished run directory.
    Report {
        run_dir: PathBuf,
        /// Output directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a config and print the expanded task list without training.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Directory holding run directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Run directory name; defaults to one derived from the config.
    #[arg(long)]
    run_id: Option<String>,
    /// Replace an existing run directory.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    quiet: bool,
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<BenchmarkConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn gen(
    dataset: &str,
    seed: u64,
    out: Option<PathBuf>,
    sizes: [Option<usize>; 4],
) -> Result<u8> {
    let system: SystemId = dataset.parse()?;
    let d = GenerationSizes::default();
    let sizes = GenerationSizes {
        n_train: sizes[0].unwrap_or(d.n_train),
        n_val: sizes[1].unwrap_or(d.n_val),
        n_test: sizes[2].unwrap_or(d.n_test),
        n_timesteps: sizes[3].unwrap_or(d.n_timesteps),
    };
    let path = out.unwrap_or_else(|| {
        data_dir()
            .unwrap_or_else(|| PathBuf::from("."))
            .join(format!("{}.{DATASET_EXTENSION}", system.name()))
    });
    let ds = generate_dataset(&OdeSystem::new(system), sizes, seed)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    save_dataset(&ds, &path)?;
    let c = &ds.counts;
    println!(
        "wrote {}: {} train / {} val / {} test, {} timesteps, {} quantities",
        path.display(),
        c.n_train,
        c.n_val,
        c.n_test,
        c.n_timesteps,
        c.n_quantities
    );
    Ok(0)
}

fn run(cfg: BenchmarkConfig, args: &RunArgs) -> Result<u8> {
    let run_id = args.run_id.clone().unwrap_or_else(|| default_run_id(&cfg));
    let opts = BenchOptions {
        run_dir: args.out.join(&run_id),
        workers: args.workers,
        force: args.force,
        data_dir: data_dir(),
        quiet: args.quiet,
        inject_failure: None,
    };
    let summary = run_bench(&cfg, &opts)?;
    if args.json {
        let failures: Vec<_> = summary
            .failures
            .iter()
            .map(|(task, error)| json!({"task": task, "error": error}))
            .collect();
        println!(
            "{}",
            json!({
                "run_dir": summary.run_dir,
                "n_tasks": summary.n_tasks,
                "n_failed": summary.failures.len(),
                "failures": failures,
                "exit_code": summary.exit_code(),
            })
        );
    } else {
        println!(
            "{} tasks, {} failed; report at {}",
            summary.n_tasks,
            summary.failures.len(),
            summary.run_dir.join("report.md").display()
        );
    }
    Ok(summary.exit_code() as u8)
}

fn validate(config: &Path, seed: Option<u64>, as_json: bool) -> Result<u8> {
    let cfg = load_config(config, seed)?;
    let tasks = expand_tasks(&cfg);
    if as_json {
        println!("{}", json!({"n_tasks": tasks.len(), "tasks": tasks}));
    } else {
        println!("{:<5} {:<8} {:<14} {:>20}", "#", "model", "modality", "seed");
        for (i, t) in tasks.iter().enumerate() {
            println!("{:<5} {:<8} {:<14} {:>20}", i + 1, t.surrogate.id(), t.modality.tag(), t.seed);
        }
        println!("{} tasks", tasks.len());
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Gen {
            dataset,
            seed,
            out,
            n_train,
            n_val,
            n_test,
            n_timesteps,
        } => gen(&dataset, seed, out, [n_train, n_val, n_test, n_timesteps]),
        Command::Train { run: args, surrogates } => {
            let mut cfg = load_config(&args.config, args.seed)?;
            if !surrogates.is_empty() {
                cfg.surrogates = surrogates;
                cfg.hyperparameters.retain(|k, _| cfg.surrogates.contains(k));
            }
            cfg.modalities = Modalities::default();
            cfg.evaluation = EvaluationToggles {
                timing: false,
                gradients_pcc: false,
                uq_pcc: false,
                heatmaps: false,
                error_over_time: true,
                distributions: false,
            };
            run(cfg, &args)
        }
        Command::Bench { run: args } => {
            let cfg = load_config(&args.config, args.seed)?;
            run(cfg, &args)
        }
        Command::Report { run_dir, out } => {
            let out = out.unwrap_or_else(|| run_dir.clone());
            let manifest = write_report_to(&run_dir, &out)?;
            println!(
                "wrote {} files to {} ({} plots skipped)",
                manifest.files.len(),
                out.display(),
                manifest.skipped.len()
            );
            Ok(0)
        }
        Command::ValidateConfig { config, seed, json } => validate(&config, seed, json),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
