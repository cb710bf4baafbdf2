use std::fs;
use std::path::Path;

use super::svg::{Bar, BarChart, HeatCell, Heatmap, LineChart, LineSeries};
use super::{ManifestEntry, ReportManifest, RunReport, SkippedPlot};
use crate::error::{Error, Result};
use crate::harness::Modality;
use crate::surrogates::SurrogateKind;
use crate::tabular::{parse_f64, read_columns, read_records, write_records};

enum Chart {
    Line(LineChart),
    Bar(BarChart),
    Heat(Heatmap),
}

impl Chart {
    fn render(&self) -> (String, (Vec<String>, Vec<Vec<String>>)) {
        match self {
            Chart::Line(c) => (c.to_svg(), c.csv_records()),
            Chart::Bar(c) => (c.to_svg(), c.csv_records()),
            Chart::Heat(c) => (c.to_svg(), c.csv_records()),
        }
    }
}

struct Emitter<'a> {
    dir: &'a Path,
    manifest: ReportManifest,
}

impl Emitter<'_> {
    fn emit(&mut self, name: &str, chart: Result<Chart>) -> Result<()> {
        let chart = match chart {
            Ok(c) => c,
            Err(e) => {
                self.manifest.skipped.push(SkippedPlot {
                    plot: format!("plots/{name}.svg"),
                    reason: e.to_string(),
                });
                return Ok(());
            }
        };
        let (svg, (header, rows)) = chart.render();
        let svg_path = self.dir.join(format!("{name}.svg"));
        fs::write(&svg_path, svg).map_err(|e| Error::io(&svg_path, e))?;
        write_records(&self.dir.join(format!("{name}.csv")), &header, &rows)?;
        self.manifest.files.push(ManifestEntry {
            path: format!("plots/{name}.svg"),
            kind: "plot".into(),
            data: Some(format!("plots/{name}.csv")),
        });
        Ok(())
    }
}

fn missing(path: &Path) -> Error {
    Error::InvalidArgument(format!("missing series {}", path.display()))
}

/// Named numeric columns of a series file inside a cell directory.
fn series(report: &RunReport, kind: SurrogateKind, modality: Modality, file: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let cell = report
        .cell(kind, modality)
        .filter(|c| c.error.is_none())
        .ok_or_else(|| Error::InvalidArgument(format!("{kind}/{modality} did not complete")))?;
    let path = report.cell_dir(cell).join(file);
    if !path.is_file() {
        return Err(missing(&path));
    }
    let (header, cols) = read_columns(&path)?;
    Ok(header.into_iter().zip(cols).collect())
}

fn column<'a>(cols: &'a [(String, Vec<f64>)], name: &str) -> Result<&'a Vec<f64>> {
    cols.iter()
        .find(|(h, _)| h == name)
        .map(|(_, c)| c)
        .ok_or_else(|| Error::Format(format!("series has no column `{name}`")))
}

fn line(title: String, x_label: &str, y_label: &str, log_y: bool, series: Vec<LineSeries>) -> Chart {
    Chart::Line(LineChart {
        title,
        x_label: x_label.into(),
        y_label: y_label.into(),
        log_y,
        series,
    })
}

fn error_over_time(report: &RunReport, kind: SurrogateKind) -> Result<Chart> {
    let cols = series(report, kind, Modality::Main, "error_over_time.csv")?;
    let t = column(&cols, "time")?;
    Ok(line(
        format!("{kind}: relative error over time"),
        "time",
        "relative error",
        true,
        vec![
            LineSeries {
                name: "mean".into(),
                x: t.clone(),
                y: column(&cols, "mean_relative_error")?.clone(),
            },
            LineSeries {
                name: "median".into(),
                x: t.clone(),
                y: column(&cols, "median_relative_error")?.clone(),
            },
        ],
    ))
}

fn uncertainty_over_time(report: &RunReport, kind: SurrogateKind) -> Result<Chart> {
    let cols = series(report, kind, Modality::Main, "uncertainty_over_time.csv")?;
    let t = column(&cols, "time")?;
    Ok(line(
        format!("{kind}: predictive uncertainty and MAE"),
        "time",
        "abundance units",
        true,
        vec![
            LineSeries {
                name: "uncertainty (1 sigma)".into(),
                x: t.clone(),
                y: column(&cols, "mean_sigma")?.clone(),
            },
            LineSeries {
                name: "MAE of ensemble mean".into(),
                x: t.clone(),
                y: column(&cols, "mae_ensemble_mean")?.clone(),
            },
        ],
    ))
}

fn heatmap(report: &RunReport, kind: SurrogateKind, file: &str, x_label: &str) -> Result<Chart> {
    let cell = report
        .cell(kind, Modality::Main)
        .filter(|c| c.error.is_none())
        .ok_or_else(|| Error::InvalidArgument(format!("{kind}/main did not complete")))?;
    let path = report.cell_dir(cell).join(file);
    if !path.is_file() {
        return Err(missing(&path));
    }
    let (header, rows) = read_records(&path)?;
    let idx = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("heatmap has no column `{name}`")))
    };
    let (xl, xh, yl, yh, n) = (idx("x_lo")?, idx("x_hi")?, idx("y_lo")?, idx("y_hi")?, idx("count")?);
    let cells = rows
        .iter()
        .map(|r| {
            Ok(HeatCell {
                x_lo: parse_f64(&r[xl])?,
                x_hi: parse_f64(&r[xh])?,
                y_lo: parse_f64(&r[yl])?,
                y_hi: parse_f64(&r[yh])?,
                count: r[n]
                    .parse()
                    .map_err(|_| Error::Format(format!("bad count `{}`", r[n])))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Chart::Heat(Heatmap {
        title: format!("{kind}: absolute error vs {x_label}"),
        x_label: x_label.into(),
        y_label: "absolute error".into(),
        cells,
    }))
}

fn error_density(report: &RunReport, kind: SurrogateKind) -> Result<Chart> {
    let cols = series(report, kind, Modality::Main, "error_density.csv")?;
    let grid = column(&cols, "log10_relative_error")?;
    let series = cols
        .iter()
        .skip(1)
        .map(|(name, y)| LineSeries {
            name: name.clone(),
            x: grid.clone(),
            y: y.clone(),
        })
        .collect();
    Ok(line(
        format!("{kind}: relative error distribution (KDE)"),
        "log10 relative error",
        "density",
        false,
        series,
    ))
}

fn extrapolation_mae(report: &RunReport, kind: SurrogateKind, cutoffs: &[usize]) -> Result<Chart> {
    let mut out = Vec::new();
    for &c in cutoffs {
        let cols = series(report, kind, Modality::Extrapolation(c), "error_over_time.csv")?;
        out.push(LineSeries {
            name: format!("cutoff {c}"),
            x: column(&cols, "time")?.clone(),
            y: column(&cols, "mae")?.clone(),
        });
    }
    Ok(line(format!("{kind}: MAE over time per extrapolation cutoff"), "time", "MAE", true, out))
}

fn comparison_over_time(report: &RunReport) -> Result<Chart> {
    let mut out = Vec::new();
    for &kind in report.surrogates() {
        let Ok(cols) = series(report, kind, Modality::Main, "error_over_time.csv") else { continue };
        out.push(LineSeries {
            name: kind.id().into(),
            x: column(&cols, "time")?.clone(),
            y: column(&cols, "mean_relative_error")?.clone(),
        });
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no completed main cells".into()));
    }
    Ok(line("Mean relative error over time".into(), "time", "relative error", true, out))
}

fn comparison_density(report: &RunReport) -> Result<Chart> {
    let mut out = Vec::new();
    for &kind in report.surrogates() {
        let Ok(cols) = series(report, kind, Modality::Main, "error_density.csv") else { continue };
        out.push(LineSeries {
            name: kind.id().into(),
            x: column(&cols, "log10_relative_error")?.clone(),
            y: column(&cols, "all")?.clone(),
        });
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no error densities".into()));
    }
    Ok(line("Relative error distribution (KDE)".into(), "log10 relative error", "density", false, out))
}

/// Test MAE against the modality setting, one line per surrogate.
fn modality_curve(report: &RunReport, family: &str, x_label: &str, settings: &[Modality]) -> Result<Chart> {
    let mut out = Vec::new();
    for &kind in report.surrogates() {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for m in settings {
            let Some(metrics) = report.cell(kind, *m).and_then(|c| c.metrics.as_ref()) else { continue };
            x.push(m.setting().unwrap_or(1) as f64);
            y.push(metrics.mae);
        }
        if !x.is_empty() {
            out.push(LineSeries {
                name: kind.id().into(),
                x,
                y,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(format!("no completed {family} cells")));
    }
    Ok(line(format!("Modality: {family}"), x_label, "test MAE", true, out))
}

fn inference_bars(report: &RunReport) -> Result<Chart> {
    let bars: Vec<Bar> = report
        .surrogates()
        .iter()
        .filter_map(|&kind| {
            let t = report.cell(kind, Modality::Main)?.timing.as_ref()?.inference.as_ref()?;
            Some(Bar {
                label: kind.id().into(),
                value: t.mean_ms,
                error: t.std_ms,
            })
        })
        .collect();
    if bars.is_empty() {
        return Err(Error::InvalidArgument("no inference timings".into()));
    }
    Ok(Chart::Bar(BarChart {
        title: "Inference time for the full test set".into(),
        y_label: "ms".into(),
        bars,
    }))
}

/// Writes every available plot into `dir`; plots whose series are missing are listed as skipped.
pub fn emit_plots(report: &RunReport, dir: &Path) -> Result<ReportManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut em = Emitter {
        dir,
        manifest: ReportManifest::default(),
    };
    let cfg = &report.index.config;
    let uq = cfg.ensemble_size().is_some();
    let cutoffs: Vec<usize> = cfg
        .modalities
        .extrapolation
        .as_ref()
        .filter(|e| e.enabled)
        .map(|e| e.cutoffs.clone())
        .unwrap_or_default();

    for &kind in report.surrogates() {
        let id = kind.id();
        em.emit(&format!("error_over_time_{id}"), error_over_time(report, kind))?;
        if uq {
            em.emit(&format!("uncertainty_over_time_{id}"), uncertainty_over_time(report, kind))?;
            em.emit(
                &format!("heatmap_uq_{id}"),
                heatmap(report, kind, "heatmap_uq.csv", "predictive uncertainty"),
            )?;
        }
        em.emit(
            &format!("heatmap_gradient_{id}"),
            heatmap(report, kind, "heatmap_gradient.csv", "normalised gradient"),
        )?;
        em.emit(&format!("error_density_{id}"), error_density(report, kind))?;
        if !cutoffs.is_empty() {
            em.emit(&format!("extrapolation_mae_{id}"), extrapolation_mae(report, kind, &cutoffs))?;
        }
    }

    em.emit("error_over_time_comparison", comparison_over_time(report))?;
    em.emit("error_density_comparison", comparison_density(report))?;
    let m = &cfg.modalities;
    if let Some(i) = m.interpolation.as_ref().filter(|i| i.enabled) {
        let mut s = vec![Modality::Main];
        s.extend(i.intervals.iter().map(|&v| Modality::Interpolation(v)));
        em.emit("modality_interpolation", modality_curve(report, "interpolation", "interval", &s))?;
    }
    if !cutoffs.is_empty() {
        let s: Vec<Modality> = cutoffs.iter().map(|&v| Modality::Extrapolation(v)).collect();
        em.emit("modality_extrapolation", modality_curve(report, "extrapolation", "cutoff index", &s))?;
    }
    if let Some(sp) = m.sparse.as_ref().filter(|s| s.enabled) {
        let mut s = vec![Modality::Main];
        s.extend(sp.factors.iter().map(|&v| Modality::Sparse(v)));
        em.emit("modality_sparse", modality_curve(report, "sparse", "sparsity factor", &s))?;
    }
    if let Some(b) = m.batch.as_ref().filter(|b| b.enabled) {
        let s: Vec<Modality> = b.sizes.iter().map(|&v| Modality::Batch(v)).collect();
        em.emit("modality_batch", modality_curve(report, "batch", "batch size", &s))?;
    }
    if cfg.evaluation.timing {
        em.emit("inference_times", inference_bars(report))?;
    }
    Ok(em.manifest)
}
