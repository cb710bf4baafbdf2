use std::fmt::Write as _;

use super::{CellRecord, RunReport};
use crate::harness::Modality;
use crate::metrics::Correlation;
use crate::tabular::fmt_f64;

/// Row labels of the comparison table, in display order.
pub const TABLE_ROWS: [&str; 10] = [
    "MSE",
    "MAE",
    "MRE",
    "Inference Time (ms)",
    "Mean Uncertainty",
    "PCC UQ",
    "PCC Gradient",
    "Epochs",
    "Train Time (s)",
    "# Trainable Params",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTable {
    pub markdown: String,
    /// Run-independent rows at full precision.
    pub csv: String,
    /// Wall-clock rows, which differ between otherwise identical runs.
    pub timing_csv: String,
}

#[derive(Clone, Copy)]
enum Best {
    Min,
    Max,
    None,
}

#[derive(Clone)]
enum Cell {
    Num(f64),
    Corr(Correlation),
    Timing(f64, f64),
    Missing,
    Failed,
}

impl Cell {
    fn rank_value(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) | Cell::Timing(v, _) => Some(v),
            Cell::Corr(Correlation::Value(v)) => Some(v),
            _ => None,
        }
    }

    fn markdown(&self, row: usize) -> String {
        match *self {
            Cell::Num(v) if row == 7 || row == 9 => format!("{}", v as u64),
            Cell::Num(v) if row == 8 => format!("{v:.2}"),
            Cell::Num(v) => format!("{v:.3e}"),
            Cell::Corr(Correlation::Value(v)) => format!("{v:.3}"),
            Cell::Corr(Correlation::Undefined) => "undefined".into(),
            Cell::Timing(m, s) => format!("{m:.2} ± {s:.2}"),
            Cell::Missing => "n/a".into(),
            Cell::Failed => "failed".into(),
        }
    }

    fn csv(&self) -> String {
        match *self {
            Cell::Num(v) => fmt_f64(v),
            Cell::Corr(c) => match c {
                Correlation::Value(v) => fmt_f64(v),
                Correlation::Undefined => "undefined".into(),
            },
            Cell::Timing(m, _) => fmt_f64(m),
            Cell::Missing => String::new(),
            Cell::Failed => "failed".into(),
        }
    }
}

fn row_cells(main: Option<&CellRecord>, row: usize) -> Cell {
    let Some(cell) = main else { return Cell::Missing };
    if cell.error.is_some() {
        return Cell::Failed;
    }
    let Some(m) = &cell.metrics else { return Cell::Missing };
    let opt = |v: Option<f64>| v.map_or(Cell::Missing, Cell::Num);
    let corr = |c: Option<Correlation>| c.map_or(Cell::Missing, Cell::Corr);
    match row {
        0 => Cell::Num(m.mse),
        1 => Cell::Num(m.mae),
        2 => Cell::Num(m.mre),
        3 => cell
            .timing
            .as_ref()
            .and_then(|t| t.inference.as_ref())
            .map_or(Cell::Missing, |i| Cell::Timing(i.mean_ms, i.std_ms)),
        4 => opt(m.mean_uncertainty),
        5 => corr(m.pcc_uq),
        6 => corr(m.pcc_gradient),
        7 => Cell::Num(m.epochs as f64),
        8 => opt(cell.timing.as_ref().map(|t| t.train_time_s)),
        9 => Cell::Num(m.param_count as f64),
        _ => unreachable!("ten table rows"),
    }
}

fn best_rule(row: usize) -> Best {
    match row {
        0..=4 | 8 => Best::Min,
        5 => Best::Max,
        _ => Best::None,
    }
}

const TIMING_ROWS: [usize; 2] = [3, 8];

/// Main-cell comparison table: one column per surrogate, best value per ranked row in bold.
pub fn render_table(report: &RunReport) -> RenderedTable {
    let surrogates = report.surrogates();
    let grid: Vec<Vec<Cell>> = (0..TABLE_ROWS.len())
        .map(|row| {
            surrogates
                .iter()
                .map(|&s| row_cells(report.cell(s, Modality::Main), row))
                .collect()
        })
        .collect();

    let mut md = String::new();
    let _ = writeln!(md, "# Benchmark results: {}\n", report.index.run_id);
    let _ = writeln!(
        md,
        "Dataset: {} samples train / {} val / {} test, {} timesteps, {} quantities.\n",
        report.index.counts.n_train,
        report.index.counts.n_val,
        report.index.counts.n_test,
        report.index.counts.n_timesteps,
        report.index.counts.n_quantities
    );
    let _ = write!(md, "| Metric |");
    for s in surrogates {
        let _ = write!(md, " {s} |");
    }
    md.push('\n');
    md.push_str("|---|");
    for _ in surrogates {
        md.push_str("---:|");
    }
    md.push('\n');
    for (row, cells) in grid.iter().enumerate() {
        let values: Vec<Option<f64>> = cells.iter().map(Cell::rank_value).collect();
        let best = match best_rule(row) {
            Best::Min => values.iter().flatten().cloned().reduce(f64::min),
            Best::Max => values.iter().flatten().cloned().reduce(f64::max),
            Best::None => None,
        }
        .filter(|_| values.iter().flatten().count() > 1);
        let _ = write!(md, "| {} |", TABLE_ROWS[row]);
        for (cell, v) in cells.iter().zip(&values) {
            let text = cell.markdown(row);
            if best.is_some() && *v == best {
                let _ = write!(md, " **{text}** |");
            } else {
                let _ = write!(md, " {text} |");
            }
        }
        md.push('\n');
    }
    let failed: Vec<_> = report.failed().collect();
    if !failed.is_empty() {
        md.push_str("\nFailed cells:\n\n");
        for c in failed {
            let _ = writeln!(md, "- {}: {}", c.task.label(), c.error.as_deref().unwrap_or("unknown error"));
        }
    }

    let header = std::iter::once("metric".to_string())
        .chain(surrogates.iter().map(|s| s.id().to_string()))
        .collect::<Vec<_>>()
        .join(",");
    let mut csv = format!("{header}\n");
    let mut timing_csv = format!("{header}\n");
    for (row, cells) in grid.iter().enumerate() {
        let line = std::iter::once(csv_label(row).to_string())
            .chain(cells.iter().map(Cell::csv))
            .collect::<Vec<_>>()
            .join(",");
        if TIMING_ROWS.contains(&row) {
            let _ = writeln!(timing_csv, "{line}");
            if row == 3 {
                let std_line = std::iter::once("inference_ms_std".to_string())
                    .chain(cells.iter().map(|c| match c {
                        Cell::Timing(_, s) => fmt_f64(*s),
                        other => other.csv(),
                    }))
                    .collect::<Vec<_>>()
                    .join(",");
                let _ = writeln!(timing_csv, "{std_line}");
            }
        } else {
            let _ = writeln!(csv, "{line}");
        }
    }
    RenderedTable {
        markdown: md,
        csv,
        timing_csv,
    }
}

fn csv_label(row: usize) -> &'static str {
    [
        "mse",
        "mae",
        "mre",
        "inference_ms_mean",
        "mean_uncertainty",
        "pcc_uq",
        "pcc_gradient",
        "epochs",
        "train_time_s",
        "param_count",
    ][row]
}
