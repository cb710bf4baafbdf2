//! Minimal deterministic SVG charts. Every chart exposes the exact numbers it draws
//! so they can be written next to the image as CSV.

use std::fmt::Write as _;

use crate::tabular::fmt_f64;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    );
}

/// Linear or log10 axis mapping data values to pixels.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi <= lo {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..=4)
            .map(|i| {
                let raw = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                let value = if self.log { 10f64.powf(raw) } else { raw };
                (self.px_lo + (self.px_hi - self.px_lo) * i as f64 / 4.0, format!("{value:.3e}"))
            })
            .collect()
    }
}

fn frame(out: &mut String, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        "<rect x=\"{x0:.2}\" y=\"{y1:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
        x1 - x0,
        y0 - y1
    );
    for (px, label) in x.ticks() {
        let _ = writeln!(
            out,
            "<line x1=\"{px:.2}\" y1=\"{y0:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"black\"/><text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"10\">{label}</text>",
            y0 + 5.0,
            y0 + 18.0
        );
    }
    for (py, label) in y.ticks() {
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{x0:.2}\" y2=\"{py:.2}\" stroke=\"black\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"10\">{label}</text>",
            x0 - 5.0,
            x0 - 7.0,
            py + 3.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 14.0,
        esc(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(y_label)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 12.0 + 16.0 * i as f64;
        let x = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"12\" height=\"4\" fill=\"{}\"/><text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>",
            y - 4.0,
            color(i),
            x + 16.0,
            y,
            esc(name)
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSeries {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<LineSeries>,
}

impl LineChart {
    /// The series restricted to drawable points (finite, and positive on a log axis).
    pub fn plotted(&self) -> Vec<LineSeries> {
        self.series
            .iter()
            .map(|s| {
                let (x, y) = s
                    .x
                    .iter()
                    .zip(&s.y)
                    .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || **y > 0.0))
                    .map(|(x, y)| (*x, *y))
                    .unzip();
                LineSeries {
                    name: s.name.clone(),
                    x,
                    y,
                }
            })
            .collect()
    }

    pub fn csv_records(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let rows = self
            .plotted()
            .iter()
            .flat_map(|s| {
                s.x.iter()
                    .zip(&s.y)
                    .map(|(x, y)| vec![s.name.clone(), fmt_f64(*x), fmt_f64(*y)])
                    .collect::<Vec<_>>()
            })
            .collect();
        (vec!["series".into(), "x".into(), "y".into()], rows)
    }

    pub fn to_svg(&self) -> String {
        let series = self.plotted();
        let x = Axis::new(series.iter().flat_map(|s| s.x.clone()), false, LEFT, WIDTH - RIGHT);
        let y = Axis::new(series.iter().flat_map(|s| s.y.clone()), self.log_y, HEIGHT - BOTTOM, TOP);
        let mut out = String::new();
        header(&mut out, &self.title);
        frame(&mut out, &x, &y, &self.x_label, &self.y_label);
        for (i, s) in series.iter().enumerate() {
            let pts: Vec<String> = s
                .x
                .iter()
                .zip(&s.y)
                .map(|(a, b)| format!("{:.2},{:.2}", x.map(*a), y.map(*b)))
                .collect();
            if pts.len() == 1 {
                let (cx, cy) = pts[0].split_once(',').expect("point");
                let _ = writeln!(out, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{}\"/>", color(i));
            } else if !pts.is_empty() {
                let _ = writeln!(
                    out,
                    "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
                    color(i),
                    pts.join(" ")
                );
            }
        }
        legend(&mut out, &series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub y_label: String,
    pub bars: Vec<Bar>,
}

impl BarChart {
    pub fn csv_records(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let rows = self
            .bars
            .iter()
            .map(|b| vec![b.label.clone(), fmt_f64(b.value), fmt_f64(b.error)])
            .collect();
        (vec!["label".into(), "value".into(), "error".into()], rows)
    }

    pub fn to_svg(&self) -> String {
        let top = self.bars.iter().map(|b| b.value + b.error).fold(0.0, f64::max);
        let y = Axis::new([0.0, top].into_iter(), false, HEIGHT - BOTTOM, TOP);
        let x = Axis::new([0.0, self.bars.len().max(1) as f64].into_iter(), false, LEFT, WIDTH - RIGHT);
        let mut out = String::new();
        header(&mut out, &self.title);
        frame(&mut out, &x, &y, "", &self.y_label);
        let slot = (WIDTH - RIGHT - LEFT) / self.bars.len().max(1) as f64;
        for (i, b) in self.bars.iter().enumerate() {
            let x0 = LEFT + slot * (i as f64 + 0.2);
            let w = slot * 0.6;
            let y_top = y.map(b.value);
            let _ = writeln!(
                out,
                "<rect x=\"{x0:.2}\" y=\"{y_top:.2}\" width=\"{w:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                (HEIGHT - BOTTOM - y_top).max(0.0),
                color(i)
            );
            let cx = x0 + w / 2.0;
            let _ = writeln!(
                out,
                "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
                y.map(b.value - b.error),
                y.map(b.value + b.error)
            );
            let _ = writeln!(
                out,
                "<text x=\"{cx:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
                HEIGHT - BOTTOM + 32.0,
                esc(&b.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatCell {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub cells: Vec<HeatCell>,
}

impl Heatmap {
    pub fn csv_records(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let rows = self
            .cells
            .iter()
            .map(|c| {
                vec![
                    fmt_f64(c.x_lo),
                    fmt_f64(c.x_hi),
                    fmt_f64(c.y_lo),
                    fmt_f64(c.y_hi),
                    c.count.to_string(),
                ]
            })
            .collect();
        let header = ["x_lo", "x_hi", "y_lo", "y_hi", "count"].map(String::from).to_vec();
        (header, rows)
    }

    /// Cells coloured by `log10(count)` relative to the fullest cell.
    pub fn to_svg(&self) -> String {
        let x = Axis::new(self.cells.iter().flat_map(|c| [c.x_lo, c.x_hi]), false, LEFT, WIDTH - RIGHT);
        let y = Axis::new(self.cells.iter().flat_map(|c| [c.y_lo, c.y_hi]), false, HEIGHT - BOTTOM, TOP);
        let max = self.cells.iter().map(|c| c.count).max().unwrap_or(1).max(1);
        let log_max = ((max as f64).log10()).max(1e-12);
        let mut out = String::new();
        header(&mut out, &self.title);
        for c in &self.cells {
            let frac = if max == 1 { 1.0 } else { (c.count as f64).log10() / log_max };
            let (x0, x1) = (x.map(c.x_lo), x.map(c.x_hi));
            let (y0, y1) = (y.map(c.y_hi), y.map(c.y_lo));
            let _ = writeln!(
                out,
                "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                (x1 - x0).max(0.5),
                (y1 - y0).max(0.5),
                ramp(frac)
            );
        }
        frame(&mut out, &x, &y, &self.x_label, &self.y_label);
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">log colour, max {max}</text>",
            WIDTH - RIGHT + 12.0,
            TOP + 12.0
        );
        out.push_str("</svg>\n");
        out
    }
}

fn ramp(frac: f64) -> String {
    let f = frac.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(222.0, 8.0), lerp(235.0, 48.0), lerp(247.0, 107.0))
}
