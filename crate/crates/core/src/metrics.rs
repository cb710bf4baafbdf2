//! Error metrics, per-timestep series, ensemble statistics, correlations, timing and histograms.
//!
//! Standard deviations are population deviations everywhere. Relative errors use
//! `|p - y| / (|y| + MRE_EPS)` in linear space.

use std::fmt;
use std::time::Instant;

use ndarray::{Array3, ArrayView2, ArrayView3, Axis, Zip};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::surrogates::Predictor;

pub const MRE_EPS: f64 = 1e-10;
pub const PEARSON_VARIANCE_FLOOR: f64 = 1e-24;
pub const TIMING_WARMUP: usize = 1;
pub const TIMING_REPEATS: usize = 5;
pub const HISTOGRAM_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mse: f64,
    pub mae: f64,
    pub mre: f64,
}

fn same_shape(a: &ArrayView3<'_, f64>, b: &ArrayView3<'_, f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("prediction {:?} vs truth {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

#[inline]
pub fn relative_error(p: f64, y: f64) -> f64 {
    (p - y).abs() / (y.abs() + MRE_EPS)
}

pub fn error_metrics(pred: ArrayView3<'_, f64>, truth: ArrayView3<'_, f64>) -> Result<ErrorMetrics> {
    same_shape(&pred, &truth)?;
    if pred.iter().chain(truth.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("error_metrics input".into()));
    }
    let n = pred.len() as f64;
    let (mut se, mut ae, mut re) = (0.0, 0.0, 0.0);
    Zip::from(&pred).and(&truth).for_each(|&p, &y| {
        let d = p - y;
        se += d * d;
        ae += d.abs();
        re += relative_error(p, y);
    });
    Ok(ErrorMetrics {
        mse: se / n,
        mae: ae / n,
        mre: re / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorOverTime {
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
}

/// Mean and median relative error over `(sample, quantity)` at each timestep.
pub fn error_over_time(pred: ArrayView3<'_, f64>, truth: ArrayView3<'_, f64>) -> Result<ErrorOverTime> {
    same_shape(&pred, &truth)?;
    let n_t = pred.dim().1;
    let mut mean = Vec::with_capacity(n_t);
    let mut median = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let mut errs: Vec<f64> = pred
            .index_axis(Axis(1), t)
            .iter()
            .zip(truth.index_axis(Axis(1), t).iter())
            .map(|(&p, &y)| relative_error(p, y))
            .collect();
        mean.push(errs.iter().sum::<f64>() / errs.len() as f64);
        median.push(median_in_place(&mut errs));
    }
    Ok(ErrorOverTime { mean, median })
}

/// Median of a non-empty slice via a full sort; even lengths average the middle pair.
pub fn median_in_place(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Mean absolute error over `(sample, quantity)` at each timestep.
pub fn mae_over_time(pred: ArrayView3<'_, f64>, truth: ArrayView3<'_, f64>) -> Result<Vec<f64>> {
    same_shape(&pred, &truth)?;
    Ok((0..pred.dim().1)
        .map(|t| {
            let p = pred.index_axis(Axis(1), t);
            let y = truth.index_axis(Axis(1), t);
            p.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64
        })
        .collect())
}

/// Mean of an arbitrary per-element tensor over `(sample, quantity)` at each timestep.
pub fn mean_over_time(x: ArrayView3<'_, f64>) -> Vec<f64> {
    x.axis_iter(Axis(1))
        .map(|slab| slab.iter().sum::<f64>() / slab.len().max(1) as f64)
        .collect()
}

/// Relative errors grouped by quantity, each flattened over `(sample, time)`.
pub fn relative_errors_by_quantity(pred: ArrayView3<'_, f64>, truth: ArrayView3<'_, f64>) -> Result<Vec<Vec<f64>>> {
    same_shape(&pred, &truth)?;
    Ok((0..pred.dim().2)
        .map(|q| {
            pred.index_axis(Axis(2), q)
                .iter()
                .zip(truth.index_axis(Axis(2), q).iter())
                .map(|(&p, &y)| relative_error(p, y))
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean: Array3<f64>,
    pub sigma: Array3<f64>,
    pub mean_uncertainty: f64,
}

pub fn ensemble_stats(preds: &[Array3<f64>]) -> Result<EnsembleStats> {
    if preds.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "ensemble needs at least 2 members, got {}",
            preds.len()
        )));
    }
    let dim = preds[0].dim();
    if let Some(bad) = preds.iter().find(|p| p.dim() != dim) {
        return Err(Error::Shape(format!("ensemble member {:?} vs {:?}", bad.dim(), dim)));
    }
    let n = preds.len() as f64;
    let mut mean = Array3::zeros(dim);
    for p in preds {
        mean += p;
    }
    mean /= n;
    // One correction pass makes the mean exact when all members agree, so sigma is exactly 0 there.
    let mut shift = Array3::<f64>::zeros(dim);
    for p in preds {
        Zip::from(&mut shift).and(p).and(&mean).for_each(|s, &x, &m| *s += x - m);
    }
    Zip::from(&mut mean).and(&shift).for_each(|m, &s| *m += s / n);
    let mut var = Array3::<f64>::zeros(dim);
    for p in preds {
        Zip::from(&mut var).and(p).and(&mean).for_each(|v, &x, &m| *v += (x - m) * (x - m));
    }
    let sigma = var.mapv(|v| (v / n).sqrt());
    let mean_uncertainty = sigma.mean().unwrap_or(0.0);
    Ok(EnsembleStats {
        mean,
        sigma,
        mean_uncertainty,
    })
}

/// A Pearson coefficient, or the explicit marker for a zero-variance input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Value(f64),
    Undefined,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Value(v) => Some(v),
            Correlation::Undefined => None,
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correlation::Value(v) => write!(f, "{v}"),
            Correlation::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for Correlation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Correlation::Value(v) => s.serialize_f64(*v),
            Correlation::Undefined => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Correlation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Correlation::Value(v)),
            Raw::Text(t) if t == "undefined" => Ok(Correlation::Undefined),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid correlation `{t}`"))),
        }
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("pearson inputs have lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("pearson needs at least 2 points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx / n < PEARSON_VARIANCE_FLOOR || syy / n < PEARSON_VARIANCE_FLOOR {
        return Ok(Correlation::Undefined);
    }
    Ok(Correlation::Value((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Per-quantity normalized `|dy/dt|` with central differences inside and one-sided ones at the ends.
pub fn data_gradients(truth: ArrayView3<'_, f64>, t_grid: &[f64]) -> Result<Array3<f64>> {
    let (s, n_t, q) = truth.dim();
    if n_t < 2 || t_grid.len() != n_t {
        return Err(Error::InvalidArgument(format!(
            "data_gradients needs T >= 2 and a matching grid (T={n_t}, grid={})",
            t_grid.len()
        )));
    }
    if t_grid.windows(2).any(|w| !(w[1] - w[0] > 0.0)) {
        return Err(Error::InvalidArgument("degenerate time grid spacing".into()));
    }
    let mut g = Array3::zeros((s, n_t, q));
    for si in 0..s {
        for qi in 0..q {
            for t in 0..n_t {
                let (lo, hi) = match t {
                    0 => (0, 1),
                    _ if t == n_t - 1 => (t - 1, t),
                    _ => (t - 1, t + 1),
                };
                g[[si, t, qi]] = ((truth[[si, hi, qi]] - truth[[si, lo, qi]]) / (t_grid[hi] - t_grid[lo])).abs();
            }
        }
    }
    for mut lane in g.axis_iter_mut(Axis(2)) {
        let max = lane.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            lane.mapv_inplace(|v| v / max);
        }
    }
    Ok(g)
}

/// Correlation between per-element ensemble sigma and the ensemble-mean absolute error.
pub fn uq_correlation(stats: &EnsembleStats, truth: ArrayView3<'_, f64>) -> Result<Correlation> {
    same_shape(&stats.mean.view(), &truth)?;
    let sigma: Vec<f64> = stats.sigma.iter().copied().collect();
    let err: Vec<f64> = stats.mean.iter().zip(truth.iter()).map(|(m, y)| (m - y).abs()).collect();
    pearson(&sigma, &err)
}

/// Correlation between normalized data gradients of the truth and the absolute prediction error.
pub fn gradient_correlation(pred: ArrayView3<'_, f64>, truth: ArrayView3<'_, f64>, t_grid: &[f64]) -> Result<Correlation> {
    same_shape(&pred, &truth)?;
    let grads = data_gradients(truth, t_grid)?;
    let err: Vec<f64> = pred.iter().zip(truth.iter()).map(|(p, y)| (p - y).abs()).collect();
    pearson(&grads.iter().copied().collect::<Vec<_>>(), &err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceTiming {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub samples_ms: Vec<f64>,
}

/// One untimed warm-up, then [`TIMING_REPEATS`] timed full predictions.
pub fn measure_inference(model: &dyn Predictor, y0: ArrayView2<'_, f64>, t_grid: &[f64]) -> Result<InferenceTiming> {
    for _ in 0..TIMING_WARMUP {
        model.predict(y0, t_grid)?;
    }
    let mut samples_ms = Vec::with_capacity(TIMING_REPEATS);
    for _ in 0..TIMING_REPEATS {
        let start = Instant::now();
        model.predict(y0, t_grid)?;
        samples_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let (mean_ms, std_ms) = mean_and_population_std(&samples_ms);
    Ok(InferenceTiming {
        mean_ms,
        std_ms,
        samples_ms,
    })
}

pub fn mean_and_population_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2d {
    pub bins: usize,
    /// Row-major `[x_bin, y_bin]`.
    pub counts: Vec<u64>,
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
}

impl Histogram2d {
    pub fn get(&self, xi: usize, yi: usize) -> u64 {
        self.counts[xi * self.bins + yi]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn axis_edges(v: &[f64], bins: usize) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    (0..=bins)
        .map(|i| if i == bins { hi } else { lo + (hi - lo) * i as f64 / bins as f64 })
        .collect()
}

fn bin_of(v: f64, edges: &[f64]) -> usize {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let i = ((v - lo) / (hi - lo) * bins as f64).floor();
    (i.max(0.0) as usize).min(bins - 1)
}

/// Uniform bins over `[min, max]` of each axis; the maximum falls into the last bin.
pub fn histogram2d(x: &[f64], y: &[f64], bins: usize) -> Result<Histogram2d> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("histogram inputs have lengths {} and {}", x.len(), y.len())));
    }
    if x.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("histogram2d needs points and at least one bin".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("histogram2d input".into()));
    }
    let x_edges = axis_edges(x, bins);
    let y_edges = axis_edges(y, bins);
    let mut counts = vec![0u64; bins * bins];
    for (&a, &b) in x.iter().zip(y) {
        counts[bin_of(a, &x_edges) * bins + bin_of(b, &y_edges)] += 1;
    }
    Ok(Histogram2d {
        bins,
        counts,
        x_edges,
        y_edges,
    })
}

/// Silverman's rule of thumb, `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, with fallbacks for
/// degenerate spreads.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 1.0;
    }
    let (_, sd) = mean_and_population_std(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 1.0,
    };
    0.9 * spread * (n as f64).powf(-0.2)
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Gaussian kernel density estimate of `samples` evaluated at `grid`.
pub fn gaussian_kde(samples: &[f64], grid: &[f64], bandwidth: f64) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&g| {
            samples
                .iter()
                .map(|&x| {
                    let u = (g - x) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Smallest relative error mapped onto the log axis; exact predictions would be `-inf`.
pub const LOG_ERROR_FLOOR: f64 = 1e-16;

/// Densities of `log10` relative errors per quantity plus the pooled distribution, on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDensity {
    pub grid: Vec<f64>,
    pub per_quantity: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
}

pub fn error_density(pred: ArrayView3<'_, f64>, truth: ArrayView3<'_, f64>, points: usize) -> Result<ErrorDensity> {
    let groups: Vec<Vec<f64>> = relative_errors_by_quantity(pred, truth)?
        .into_iter()
        .map(|g| g.into_iter().map(|r| r.max(LOG_ERROR_FLOOR).log10()).collect())
        .collect();
    let pooled_samples: Vec<f64> = groups.iter().flatten().copied().collect();
    if pooled_samples.is_empty() || points < 2 {
        return Err(Error::InvalidArgument("error_density needs samples and at least 2 grid points".into()));
    }
    let h_all = silverman_bandwidth(&pooled_samples);
    let lo = pooled_samples.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * h_all;
    let hi = pooled_samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h_all;
    let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let per_quantity = groups
        .iter()
        .map(|g| gaussian_kde(g, &grid, silverman_bandwidth(g)))
        .collect();
    let pooled = gaussian_kde(&pooled_samples, &grid, h_all);
    Ok(ErrorDensity {
        grid,
        per_quantity,
        pooled,
    })
}

/// Deterministic per-cell results, serialized as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub surrogate: String,
    pub modality: String,
    pub seed: u64,
    pub epochs: usize,
    pub param_count: usize,
    pub n_train_samples: usize,
    pub n_train_timesteps: usize,
    pub mse: f64,
    pub mae: f64,
    pub mre: f64,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub pcc_gradient: Option<Correlation>,
    pub ensemble_size: Option<usize>,
    pub mean_uncertainty: Option<f64>,
    pub pcc_uq: Option<Correlation>,
}

/// Wall-clock measurements, kept apart from [`CellMetrics`] because they vary run to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub train_time_s: f64,
    pub inference: Option<InferenceTiming>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn pearson_hand_value() {
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 5.0]).unwrap();
        let Correlation::Value(v) = r else { panic!("undefined") };
        // Covariance sum 5.5, squared deviations 5 and 8.75.
        assert!((v - 5.5 / 43.75f64.sqrt()).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), Correlation::Undefined);
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn two_member_sigma() {
        let y = Array3::from_elem((1, 2, 1), 3.0);
        let stats = ensemble_stats(&[&y - 0.5, &y + 0.5]).unwrap();
        assert!(stats.sigma.iter().all(|&s| (s - 0.5).abs() < 1e-15));
        assert!(ensemble_stats(&[y]).is_err());
    }

    #[test]
    fn gradient_of_square() {
        let truth = Array3::from_shape_vec((1, 3, 1), vec![0.0, 1.0, 4.0]).unwrap();
        let g = data_gradients(truth.view(), &[0.0, 1.0, 2.0]).unwrap();
        // Raw |dy/dt| is (1, 2, 3); normalization divides by 3.
        assert!((g[[0, 1, 0]] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(g[[0, 2, 0]], 1.0);
    }

    #[test]
    fn histogram_corners() {
        let h = histogram2d(&[0.0, 1.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 1.0], 100).unwrap();
        assert_eq!(h.get(0, 0), 1);
        assert_eq!(h.get(99, 0), 1);
        assert_eq!(h.get(0, 99), 1);
        assert_eq!(h.get(99, 99), 1);
        let same = histogram2d(&[2.0; 5], &[2.0; 5], 100).unwrap();
        assert_eq!(same.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert!(histogram2d(&[], &[], 100).is_err());
    }

    #[test]
    fn kde_integrates_to_one() {
        let samples = [0.0, 0.5, 1.0, 3.0];
        let h = silverman_bandwidth(&samples);
        let grid: Vec<f64> = (0..4001).map(|i| -10.0 + i as f64 * 0.005).collect();
        let d = gaussian_kde(&samples, &grid, h);
        let area: f64 = d.iter().sum::<f64>() * 0.005;
        assert!((area - 1.0).abs() < 1e-6, "{area}");
    }

    #[test]
    fn correlation_serializes_marker() {
        assert_eq!(serde_json::to_string(&Correlation::Undefined).unwrap(), "\"undefined\"");
        let back: Correlation = serde_json::from_str("0.5").unwrap();
        assert_eq!(back, Correlation::Value(0.5));
    }
}
