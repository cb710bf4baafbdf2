//! Trajectory datasets and the `CODES-DS v1` container.
//!
//! Layout of a container file:
//!
//! | bytes          | content                                              |
//! |----------------|------------------------------------------------------|
//! | `0..8`         | ASCII magic `CODESDS1`                               |
//! | `8..16`        | header length `H`, `u64` little-endian               |
//! | `16..16+H`     | UTF-8 JSON header                                    |
//! | `16+H..`       | train, val, test payloads, row-major `f64` LE        |
//!
//! Each payload is laid out `[samples][timesteps][quantities]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array, Array3, ArrayBase, ArrayView3, Axis, Data, Dimension};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 8] = b"CODESDS1";

/// The five integer counts stored alongside the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_timesteps: usize,
    pub n_quantities: usize,
}

/// Train/val/test trajectories, each `[samples, timesteps, quantities]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub train: Array3<f64>,
    pub val: Array3<f64>,
    pub test: Array3<f64>,
    pub timesteps: Option<Vec<f64>>,
    pub labels: Option<Vec<String>>,
    pub counts: DatasetCounts,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    n_train: usize,
    n_val: usize,
    n_test: usize,
    n_timesteps: usize,
    n_quantities: usize,
    dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timesteps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl TrajectoryDataset {
    /// Builds a dataset with counts taken from the tensor shapes and validates it.
    pub fn new(
        train: Array3<f64>,
        val: Array3<f64>,
        test: Array3<f64>,
        timesteps: Option<Vec<f64>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n_train, n_timesteps, n_quantities) = train.dim();
        let counts = DatasetCounts {
            n_train,
            n_val: val.dim().0,
            n_test: test.dim().0,
            n_timesteps,
            n_quantities,
        };
        let ds = Self {
            train,
            val,
            test,
            timesteps,
            labels,
            counts,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.counts;
        for (name, split, n) in [
            ("train", &self.train, c.n_train),
            ("val", &self.val, c.n_val),
            ("test", &self.test, c.n_test),
        ] {
            let expected = (n, c.n_timesteps, c.n_quantities);
            if split.dim() != expected {
                return Err(Error::Invariant(format!(
                    "{name} split has shape {:?}, counts say {:?}",
                    split.dim(),
                    expected
                )));
            }
            if split.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invariant(format!("{name} split contains non-finite values")));
            }
        }
        if let Some(ts) = &self.timesteps {
            if ts.len() != c.n_timesteps {
                return Err(Error::Invariant(format!(
                    "timesteps has length {}, expected {}",
                    ts.len(),
                    c.n_timesteps
                )));
            }
            if ts.iter().any(|t| !t.is_finite()) {
                return Err(Error::Invariant("timesteps contain non-finite values".into()));
            }
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Invariant("timesteps are not strictly increasing".into()));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != c.n_quantities {
                return Err(Error::Invariant(format!(
                    "labels has length {}, expected {}",
                    labels.len(),
                    c.n_quantities
                )));
            }
        }
        Ok(())
    }

    pub fn n_quantities(&self) -> usize {
        self.counts.n_quantities
    }

    pub fn n_timesteps(&self) -> usize {
        self.counts.n_timesteps
    }

    /// The stored time grid, or timestep indices when none is stored.
    pub fn time_grid(&self) -> Vec<f64> {
        match &self.timesteps {
            Some(ts) => ts.clone(),
            None => (0..self.counts.n_timesteps).map(|i| i as f64).collect(),
        }
    }

    pub fn labels_or_default(&self) -> Vec<String> {
        match &self.labels {
            Some(l) => l.clone(),
            None => (0..self.counts.n_quantities).map(|q| format!("q{q}")).collect(),
        }
    }

    /// Serializes to the container byte layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let c = self.counts;
        let header = Header {
            n_train: c.n_train,
            n_val: c.n_val,
            n_test: c.n_test,
            n_timesteps: c.n_timesteps,
            n_quantities: c.n_quantities,
            dtype: "f64".into(),
            timesteps: self.timesteps.clone(),
            labels: self.labels.clone(),
        };
        let header = serde_json::to_vec(&header)?;
        let n_values = self.train.len() + self.val.len() + self.test.len();
        let mut out = Vec::with_capacity(16 + header.len() + 8 * n_values);
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for split in [&self.train, &self.val, &self.test] {
            // iter() on an ndarray walks in logical (row-major) order regardless of memory layout
            for v in split.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Format(format!("file is {} bytes, shorter than the fixed prefix", bytes.len())));
        }
        if &bytes[..8] != DATASET_MAGIC {
            return Err(Error::BadMagic {
                expected: "CODESDS1",
                found: bytes[..8].to_vec(),
            });
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8-byte slice"));
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|h| h.checked_add(16))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::Format(format!("header length {header_len} exceeds file size")))?;
        let header: Header = serde_json::from_slice(&bytes[16..header_end])
            .map_err(|e| Error::Format(format!("header json: {e}")))?;
        if header.dtype != "f64" {
            return Err(Error::Format(format!("unsupported dtype `{}`", header.dtype)));
        }
        let per_sample = header
            .n_timesteps
            .checked_mul(header.n_quantities)
            .ok_or_else(|| Error::Format("header counts overflow".into()))?;
        let n_values = [header.n_train, header.n_val, header.n_test]
            .iter()
            .try_fold(0usize, |acc, &n| n.checked_mul(per_sample).and_then(|v| acc.checked_add(v)))
            .ok_or_else(|| Error::Format("header counts overflow".into()))?;
        let payload = &bytes[header_end..];
        if payload.len() != n_values.saturating_mul(8) {
            return Err(Error::Format(format!(
                "payload is {} bytes, header implies {}",
                payload.len(),
                n_values.saturating_mul(8)
            )));
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let mut take = |n: usize| -> Result<Array3<f64>> {
            let data: Vec<f64> = values.by_ref().take(n * per_sample).collect();
            Array3::from_shape_vec((n, header.n_timesteps, header.n_quantities), data)
                .map_err(|e| Error::Format(e.to_string()))
        };
        let train = take(header.n_train)?;
        let val = take(header.n_val)?;
        let test = take(header.n_test)?;
        let ds = Self {
            train,
            val,
            test,
            timesteps: header.timesteps,
            labels: header.labels,
            counts: DatasetCounts {
                n_train: header.n_train,
                n_val: header.n_val,
                n_test: header.n_test,
                n_timesteps: header.n_timesteps,
                n_quantities: header.n_quantities,
            },
        };
        ds.validate()?;
        Ok(ds)
    }
}

pub fn save_dataset(ds: &TrajectoryDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = ds.to_bytes()?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    TrajectoryDataset::from_bytes(&bytes)
}

/// Per-quantity z-score normalization with an optional log10 pre-transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub log10_enabled: bool,
    pub per_quantity_mean: Vec<f64>,
    pub per_quantity_std: Vec<f64>,
    pub time_scale: f64,
}

const STD_FLOOR: f64 = 1e-12;

impl NormalizationTransform {
    /// Fits mean and population std per quantity over every sample and timestep of `values`.
    pub fn fit(values: ArrayView3<'_, f64>, time_grid: &[f64], log10_enabled: bool) -> Result<Self> {
        let (_, _, n_q) = values.dim();
        if log10_enabled && values.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidArgument(
                "log10 normalization requires strictly positive training values".into(),
            ));
        }
        let mut mean = vec![0.0; n_q];
        let mut std = vec![1.0; n_q];
        for q in 0..n_q {
            let lane = values.index_axis(Axis(2), q);
            let xs: Vec<f64> = lane
                .iter()
                .map(|&v| if log10_enabled { v.log10() } else { v })
                .collect();
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            mean[q] = m;
            let s = var.sqrt();
            std[q] = if s < STD_FLOOR { 1.0 } else { s };
        }
        let max_t = time_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let time_scale = if max_t.is_finite() && max_t > 0.0 { max_t } else { 1.0 };
        Ok(Self {
            log10_enabled,
            per_quantity_mean: mean,
            per_quantity_std: std,
            time_scale,
        })
    }

    /// Leaves values unchanged and time unscaled.
    pub fn identity(n_quantities: usize) -> Self {
        Self {
            log10_enabled: false,
            per_quantity_mean: vec![0.0; n_quantities],
            per_quantity_std: vec![1.0; n_quantities],
            time_scale: 1.0,
        }
    }

    pub fn n_quantities(&self) -> usize {
        self.per_quantity_mean.len()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n_quantities() {
            return Err(Error::Shape(format!(
                "last axis has {width} quantities, transform was fit on {}",
                self.n_quantities()
            )));
        }
        Ok(())
    }

    /// Maps linear-space values to normalized space along the last axis.
    pub fn apply<S, D>(&self, x: &ArrayBase<S, D>) -> Result<Array<f64, D>>
    where
        S: Data<Elem = f64>,
        D: Dimension,
    {
        self.check_width(x.shape().last().copied().unwrap_or(0))?;
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (q, v) in row.iter_mut().enumerate() {
                let base = if self.log10_enabled { v.log10() } else { *v };
                *v = (base - self.per_quantity_mean[q]) / self.per_quantity_std[q];
            }
        }
        Ok(out)
    }

    /// Exact inverse of [`apply`](Self::apply).
    pub fn invert<S, D>(&self, x: &ArrayBase<S, D>) -> Result<Array<f64, D>>
    where
        S: Data<Elem = f64>,
        D: Dimension,
    {
        self.check_width(x.shape().last().copied().unwrap_or(0))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("invert_transform input".into()));
        }
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (q, v) in row.iter_mut().enumerate() {
                let base = *v * self.per_quantity_std[q] + self.per_quantity_mean[q];
                *v = if self.log10_enabled { 10f64.powf(base) } else { base };
            }
        }
        Ok(out)
    }

    pub fn normalize_time(&self, t: f64) -> f64 {
        t / self.time_scale
    }
}

/// Which train samples and timesteps a training run may see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSubset {
    pub sample_indices: Vec<usize>,
    pub time_indices: Vec<usize>,
}

impl TrainingSubset {
    pub fn full(ds: &TrajectoryDataset) -> Self {
        Self {
            sample_indices: (0..ds.counts.n_train).collect(),
            time_indices: (0..ds.counts.n_timesteps).collect(),
        }
    }

    /// Train values restricted to this subset, shape `[samples, times, quantities]`.
    pub fn select(&self, ds: &TrajectoryDataset) -> Result<Array3<f64>> {
        self.check(ds)?;
        Ok(ds
            .train
            .select(Axis(0), &self.sample_indices)
            .select(Axis(1), &self.time_indices))
    }

    pub fn check(&self, ds: &TrajectoryDataset) -> Result<()> {
        if self.sample_indices.is_empty() || self.time_indices.is_empty() {
            return Err(Error::InvalidArgument("training subset is empty".into()));
        }
        if self.sample_indices.iter().any(|&i| i >= ds.counts.n_train)
            || self.time_indices.iter().any(|&i| i >= ds.counts.n_timesteps)
        {
            return Err(Error::InvalidArgument("training subset index out of range".into()));
        }
        if self.time_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("training time indices must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Fits the normalization on the train split of `ds`.
pub fn fit_normalization(ds: &TrajectoryDataset, log10_enabled: bool) -> Result<NormalizationTransform> {
    NormalizationTransform::fit(ds.train.view(), &ds.time_grid(), log10_enabled)
}
