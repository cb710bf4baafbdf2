use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::config::BenchmarkConfig;
use crate::dataset::{TrainingSubset, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::surrogates::SurrogateKind;

/// Which variant of the training data a task uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Main,
    Interpolation(usize),
    Extrapolation(usize),
    Sparse(usize),
    Batch(usize),
    /// Extra ensemble member `k >= 1`; member 0 is the main model.
    Ensemble(usize),
}

impl Modality {
    /// Stable text form, used in seeds and directory names.
    pub fn tag(&self) -> String {
        match *self {
            Modality::Main => "main".into(),
            Modality::Interpolation(i) => format!("interp_{i}"),
            Modality::Extrapolation(c) => format!("extra_{c}"),
            Modality::Sparse(f) => format!("sparse_{f}"),
            Modality::Batch(b) => format!("batch_{b}"),
            Modality::Ensemble(k) => format!("ensemble_{k}"),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Modality::Main => "main",
            Modality::Interpolation(_) => "interpolation",
            Modality::Extrapolation(_) => "extrapolation",
            Modality::Sparse(_) => "sparse",
            Modality::Batch(_) => "batch",
            Modality::Ensemble(_) => "uncertainty",
        }
    }

    /// The modality's numeric setting, if any.
    pub fn setting(&self) -> Option<usize> {
        match *self {
            Modality::Main => None,
            Modality::Interpolation(v)
            | Modality::Extrapolation(v)
            | Modality::Sparse(v)
            | Modality::Batch(v)
            | Modality::Ensemble(v) => Some(v),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "main" {
            return Ok(Modality::Main);
        }
        let bad = || Error::InvalidArgument(format!("unknown modality tag `{s}`"));
        let (family, value) = s.rsplit_once('_').ok_or_else(bad)?;
        let v: usize = value.parse().map_err(|_| bad())?;
        Ok(match family {
            "interp" => Modality::Interpolation(v),
            "extra" => Modality::Extrapolation(v),
            "sparse" => Modality::Sparse(v),
            "batch" => Modality::Batch(v),
            "ensemble" => Modality::Ensemble(v),
            _ => return Err(bad()),
        })
    }
}

impl Serialize for Modality {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.tag())
    }
}

impl<'de> Deserialize<'de> for Modality {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub surrogate: SurrogateKind,
    pub modality: Modality,
    pub seed: u64,
    /// Output directory relative to the run directory.
    pub dir: PathBuf,
}

impl Task {
    pub fn label(&self) -> String {
        format!("{}/{}", self.surrogate, self.modality)
    }

    pub fn subset(&self, ds: &TrajectoryDataset) -> Result<TrainingSubset> {
        match self.modality {
            Modality::Interpolation(i) => subset_interpolation(ds, i),
            Modality::Extrapolation(c) => subset_extrapolation(ds, c),
            Modality::Sparse(f) => subset_sparse(ds, f),
            Modality::Main | Modality::Batch(_) | Modality::Ensemble(_) => Ok(TrainingSubset::full(ds)),
        }
    }
}

/// First 8 bytes, little-endian, of `sha256("{global_seed}|{surrogate}|{tag}")`.
pub fn derive_seed(global_seed: u64, surrogate: SurrogateKind, modality: Modality) -> u64 {
    let digest = Sha256::digest(format!("{global_seed}|{}|{}", surrogate.id(), modality.tag()).as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

/// Modality settings per surrogate, in execution order.
pub fn modality_list(cfg: &BenchmarkConfig) -> Vec<Modality> {
    let m = &cfg.modalities;
    let mut out = vec![Modality::Main];
    if let Some(i) = m.interpolation.as_ref().filter(|i| i.enabled) {
        out.extend(i.intervals.iter().map(|&v| Modality::Interpolation(v)));
    }
    if let Some(e) = m.extrapolation.as_ref().filter(|e| e.enabled) {
        out.extend(e.cutoffs.iter().map(|&v| Modality::Extrapolation(v)));
    }
    if let Some(s) = m.sparse.as_ref().filter(|s| s.enabled) {
        out.extend(s.factors.iter().map(|&v| Modality::Sparse(v)));
    }
    if let Some(b) = m.batch.as_ref().filter(|b| b.enabled) {
        out.extend(b.sizes.iter().map(|&v| Modality::Batch(v)));
    }
    if let Some(n) = cfg.ensemble_size() {
        out.extend((1..n).map(Modality::Ensemble));
    }
    out
}

pub fn expand_tasks(cfg: &BenchmarkConfig) -> Vec<Task> {
    let modalities = modality_list(cfg);
    cfg.surrogates
        .iter()
        .flat_map(|&s| {
            modalities.iter().map(move |&m| Task {
                surrogate: s,
                modality: m,
                seed: derive_seed(cfg.seed, s, m),
                dir: PathBuf::from(s.id()).join(m.tag()),
            })
        })
        .collect()
}

/// Keeps train timesteps `{0, interval, 2 * interval, ...}`.
pub fn subset_interpolation(ds: &TrajectoryDataset, interval: usize) -> Result<TrainingSubset> {
    let n_t = ds.n_timesteps();
    if interval < 2 || interval >= n_t {
        return Err(Error::InvalidArgument(format!(
            "interpolation interval {interval} must be in [2, {n_t})"
        )));
    }
    Ok(TrainingSubset {
        sample_indices: (0..ds.counts.n_train).collect(),
        time_indices: (0..n_t).step_by(interval).collect(),
    })
}

/// Keeps train timesteps with index `< cutoff`.
pub fn subset_extrapolation(ds: &TrajectoryDataset, cutoff: usize) -> Result<TrainingSubset> {
    let n_t = ds.n_timesteps();
    if cutoff == 0 || cutoff >= n_t {
        return Err(Error::InvalidArgument(format!(
            "extrapolation cutoff {cutoff} must be in (0, {n_t})"
        )));
    }
    Ok(TrainingSubset {
        sample_indices: (0..ds.counts.n_train).collect(),
        time_indices: (0..cutoff).collect(),
    })
}

/// Keeps train samples `{0, factor, 2 * factor, ...}`.
pub fn subset_sparse(ds: &TrajectoryDataset, factor: usize) -> Result<TrainingSubset> {
    if factor < 2 {
        return Err(Error::InvalidArgument(format!("sparse factor {factor} must be >= 2")));
    }
    Ok(TrainingSubset {
        sample_indices: (0..ds.counts.n_train).step_by(factor).collect(),
        time_indices: (0..ds.n_timesteps()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogates::SurrogateKind::*;
    use ndarray::Array3;

    fn ds(n_train: usize, n_t: usize) -> TrajectoryDataset {
        TrajectoryDataset::new(
            Array3::ones((n_train, n_t, 1)),
            Array3::ones((1, n_t, 1)),
            Array3::ones((1, n_t, 1)),
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn subset_examples() {
        let d = ds(750, 100);
        assert_eq!(subset_interpolation(&d, 2).unwrap().time_indices.len(), 50);
        assert_eq!(subset_interpolation(&d, 3).unwrap().time_indices.len(), 34);
        assert_eq!(subset_interpolation(&d, 99).unwrap().time_indices, vec![0, 99]);
        assert_eq!(subset_extrapolation(&d, 50).unwrap().time_indices.len(), 50);
        assert_eq!(subset_extrapolation(&d, 1).unwrap().time_indices, vec![0]);
        assert_eq!(subset_sparse(&d, 8).unwrap().sample_indices.len(), 94);
        assert_eq!(subset_sparse(&d, 1000).unwrap().sample_indices, vec![0]);
        assert!(subset_extrapolation(&d, 100).is_err());
    }

    #[test]
    fn tags_roundtrip() {
        for m in [
            Modality::Main,
            Modality::Interpolation(4),
            Modality::Extrapolation(50),
            Modality::Sparse(2),
            Modality::Batch(64),
            Modality::Ensemble(3),
        ] {
            assert_eq!(m.tag().parse::<Modality>().unwrap(), m);
        }
        assert!("interp_x".parse::<Modality>().is_err());
    }

    #[test]
    fn expansion_counts() {
        let mut cfg = BenchmarkConfig::minimal(1, "simple_ode", vec![FullyConnected]);
        assert_eq!(expand_tasks(&cfg).len(), 1);
        cfg.modalities.uncertainty = Some(super::super::config::Uncertainty {
            enabled: true,
            ensemble_size: 5,
        });
        let tasks = expand_tasks(&cfg);
        assert_eq!(tasks.len(), 5);
        assert_eq!(tasks[4].modality, Modality::Ensemble(4));
    }

    #[test]
    fn seed_is_stable_and_distinct() {
        let a = derive_seed(42, MultiOnet, Modality::Main);
        assert_eq!(a, derive_seed(42, MultiOnet, Modality::Main));
        assert_ne!(a, derive_seed(42, MultiOnet, Modality::Ensemble(1)));
        assert_ne!(a, derive_seed(43, MultiOnet, Modality::Main));
    }
}
