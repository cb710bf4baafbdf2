//! Comparison table and plot files for a finished run directory.
//!
//! Output layout inside the report directory: `report.md`, `report.csv`,
//! `timing.csv`, `plots/*.svg` with a sibling `plots/*.csv` each, and `manifest.json`.

mod plots;
pub mod svg;
mod table;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{write_json, Modality, RunIndex, Task, TaskStatus};
use crate::metrics::{CellMetrics, CellTiming};
use crate::surrogates::SurrogateKind;

pub use plots::emit_plots;
pub use table::{render_table, RenderedTable, TABLE_ROWS};

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub task: Task,
    pub metrics: Option<CellMetrics>,
    pub timing: Option<CellTiming>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub run_dir: PathBuf,
    pub index: RunIndex,
    pub cells: Vec<CellRecord>,
}

impl RunReport {
    pub fn surrogates(&self) -> &[SurrogateKind] {
        &self.index.config.surrogates
    }

    pub fn cell(&self, kind: SurrogateKind, modality: Modality) -> Option<&CellRecord> {
        self.cells
            .iter()
            .find(|c| c.task.surrogate == kind && c.task.modality == modality)
    }

    pub fn cell_dir(&self, cell: &CellRecord) -> PathBuf {
        self.run_dir.join(&cell.task.dir)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CellRecord> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn load_run(run_dir: &Path) -> Result<RunReport> {
    let index = RunIndex::load(run_dir)?;
    let mut cells = Vec::with_capacity(index.tasks.len());
    for rec in &index.tasks {
        let dir = run_dir.join(&rec.task.dir);
        let (metrics, timing) = if rec.status == TaskStatus::Completed {
            let timing_path = dir.join("timing.json");
            let timing = if timing_path.is_file() { Some(read_json(&timing_path)?) } else { None };
            (Some(read_json(&dir.join("metrics.json"))?), timing)
        } else {
            (None, None)
        };
        cells.push(CellRecord {
            task: rec.task.clone(),
            metrics,
            timing,
            error: rec.error.clone(),
        });
    }
    Ok(RunReport {
        run_dir: run_dir.to_path_buf(),
        index,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: String,
    /// For plots, the CSV holding the plotted numbers.
    pub data: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPlot {
    pub plot: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub files: Vec<ManifestEntry>,
    pub skipped: Vec<SkippedPlot>,
}

impl ReportManifest {
    pub fn contains(&self, path: &str) -> bool {
        self.files.iter().any(|f| f.path == path)
    }
}

/// Renders the table and plots of `run_dir` into the same directory.
pub fn write_report(run_dir: &Path) -> Result<ReportManifest> {
    write_report_to(run_dir, run_dir)
}

pub fn write_report_to(run_dir: &Path, out_dir: &Path) -> Result<ReportManifest> {
    let report = load_run(run_dir)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let table = render_table(&report);
    let mut manifest = ReportManifest::default();
    for (name, text, kind) in [
        ("report.md", &table.markdown, "table"),
        ("report.csv", &table.csv, "table"),
        ("timing.csv", &table.timing_csv, "table"),
    ] {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        manifest.files.push(ManifestEntry {
            path: name.into(),
            kind: kind.into(),
            data: None,
        });
    }
    let plots = emit_plots(&report, &out_dir.join("plots"))?;
    manifest.files.extend(plots.files);
    manifest.skipped.extend(plots.skipped);
    manifest.files.push(ManifestEntry {
        path: "manifest.json".into(),
        kind: "manifest".into(),
        data: None,
    });
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
