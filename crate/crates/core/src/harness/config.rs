use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::odegen::GenerationSizes;
use crate::surrogates::{SurrogateKind, SurrogateOverrides, SurrogateSpec};

pub const DEFAULT_ENSEMBLE_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub surrogates: Vec<SurrogateKind>,
    #[serde(default)]
    pub hyperparameters: BTreeMap<SurrogateKind, SurrogateOverrides>,
    #[serde(default)]
    pub modalities: Modalities,
    #[serde(default)]
    pub evaluation: EvaluationToggles,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// Dataset reference. In YAML either a bare id (`dataset: simple_ode`) or a map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfigFields {
    pub name: Option<String>,
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub log10: bool,
    /// Seed for in-memory generation; defaults to the global seed.
    pub seed: Option<u64>,
    pub sizes: Option<GenerationSizes>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DatasetConfig(pub DatasetConfigFields);

impl std::ops::Deref for DatasetConfig {
    type Target = DatasetConfigFields;

    fn deref(&self) -> &DatasetConfigFields {
        &self.0
    }
}

impl<'de> Deserialize<'de> for DatasetConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = DatasetConfig;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a dataset id or a dataset map")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<DatasetConfig, E> {
                Ok(DatasetConfig(DatasetConfigFields {
                    name: Some(v.to_string()),
                    ..Default::default()
                }))
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> std::result::Result<DatasetConfig, A::Error> {
                DatasetConfigFields::deserialize(de::value::MapAccessDeserializer::new(map)).map(DatasetConfig)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modalities {
    pub interpolation: Option<Interpolation>,
    pub extrapolation: Option<Extrapolation>,
    pub sparse: Option<Sparse>,
    pub batch: Option<BatchSizes>,
    pub uncertainty: Option<Uncertainty>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interpolation {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub intervals: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extrapolation {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub cutoffs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sparse {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub factors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSizes {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Uncertainty {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_ensemble_size")]
    pub ensemble_size: usize,
}

fn default_ensemble_size() -> usize {
    DEFAULT_ENSEMBLE_SIZE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationToggles {
    #[serde(default = "default_true")]
    pub timing: bool,
    #[serde(default = "default_true")]
    pub gradients_pcc: bool,
    #[serde(default = "default_true")]
    pub uq_pcc: bool,
    #[serde(default = "default_true")]
    pub heatmaps: bool,
    #[serde(default = "default_true")]
    pub error_over_time: bool,
    #[serde(default = "default_true")]
    pub distributions: bool,
}

impl Default for EvaluationToggles {
    fn default() -> Self {
        Self {
            timing: true,
            gradients_pcc: true,
            uq_pcc: true,
            heatmaps: true,
            error_over_time: true,
            distributions: true,
        }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

pub fn parse_config(text: &str) -> Result<BenchmarkConfig> {
    let de = serde_yaml::Deserializer::from_str(text);
    let cfg: BenchmarkConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(if path == "." { "<root>" } else { &path }, e.inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl BenchmarkConfig {
    /// A config with one dataset, the given surrogates and no modalities.
    pub fn minimal(seed: u64, dataset: &str, surrogates: Vec<SurrogateKind>) -> Self {
        Self {
            seed,
            dataset: DatasetConfig(DatasetConfigFields {
                name: Some(dataset.into()),
                ..Default::default()
            }),
            surrogates,
            hyperparameters: BTreeMap::new(),
            modalities: Modalities::default(),
            evaluation: EvaluationToggles::default(),
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(config_error("workers", "must be >= 1"));
        }
        if self.surrogates.is_empty() {
            return Err(config_error("surrogates", "at least one surrogate is required"));
        }
        for (i, s) in self.surrogates.iter().enumerate() {
            if self.surrogates[..i].contains(s) {
                return Err(config_error(&format!("surrogates[{i}]"), format!("duplicate surrogate {s}")));
            }
        }
        match (&self.dataset.name, &self.dataset.path) {
            (None, None) => return Err(config_error("dataset", "needs a name or a path")),
            (Some(_), Some(_)) => return Err(config_error("dataset", "give either name or path, not both")),
            _ => {}
        }
        if let Some(sizes) = &self.dataset.sizes {
            if sizes.n_train == 0 || sizes.n_val == 0 || sizes.n_test == 0 || sizes.n_timesteps < 2 {
                return Err(config_error("dataset.sizes", "needs every split >= 1 and n_timesteps >= 2"));
            }
        }
        for (kind, o) in &self.hyperparameters {
            if !self.surrogates.contains(kind) {
                return Err(config_error(
                    &format!("hyperparameters.{kind}"),
                    "surrogate is not listed under `surrogates`",
                ));
            }
            let mut probe = SurrogateSpec::default_for(*kind, 1);
            o.apply(&mut probe)
                .map_err(|e| config_error(&format!("hyperparameters.{kind}"), e.to_string()))?;
        }
        let m = &self.modalities;
        if let Some(i) = &m.interpolation {
            check_list("modalities.interpolation.intervals", &i.intervals, 2, "intervals must be >= 2")?;
        }
        if let Some(e) = &m.extrapolation {
            check_list("modalities.extrapolation.cutoffs", &e.cutoffs, 1, "cutoffs must be > 0")?;
        }
        if let Some(s) = &m.sparse {
            check_list("modalities.sparse.factors", &s.factors, 2, "factors must be >= 2")?;
        }
        if let Some(b) = &m.batch {
            check_list("modalities.batch.sizes", &b.sizes, 1, "batch sizes must be >= 1")?;
        }
        if let Some(u) = &m.uncertainty {
            if u.enabled && u.ensemble_size < 2 {
                return Err(config_error(
                    "modalities.uncertainty.ensemble_size",
                    format!("must be >= 2 when uncertainty is enabled, got {}", u.ensemble_size),
                ));
            }
        }
        Ok(())
    }

    /// Rejects modality settings that do not fit a dataset with `n_timesteps` steps.
    pub fn validate_against(&self, n_timesteps: usize) -> Result<()> {
        let m = &self.modalities;
        if let Some(i) = m.interpolation.as_ref().filter(|i| i.enabled) {
            if let Some(&bad) = i.intervals.iter().find(|&&v| v >= n_timesteps) {
                return Err(config_error(
                    "modalities.interpolation.intervals",
                    format!("interval {bad} must be < n_timesteps ({n_timesteps})"),
                ));
            }
        }
        if let Some(e) = m.extrapolation.as_ref().filter(|e| e.enabled) {
            if let Some(&bad) = e.cutoffs.iter().find(|&&v| v >= n_timesteps) {
                return Err(config_error(
                    "modalities.extrapolation.cutoffs",
                    format!("cutoff {bad} must be < n_timesteps ({n_timesteps})"),
                ));
            }
        }
        Ok(())
    }

    /// Default spec for `kind` with this config's overrides applied.
    pub fn surrogate_spec(&self, kind: SurrogateKind, n_quantities: usize) -> Result<SurrogateSpec> {
        let mut spec = SurrogateSpec::default_for(kind, n_quantities);
        if let Some(o) = self.hyperparameters.get(&kind) {
            o.apply(&mut spec)?;
        }
        Ok(spec)
    }

    pub fn ensemble_size(&self) -> Option<usize> {
        self.modalities
            .uncertainty
            .as_ref()
            .filter(|u| u.enabled)
            .map(|u| u.ensemble_size)
    }
}

fn check_list(path: &str, values: &[usize], min: usize, message: &str) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if v < min {
            return Err(config_error(&format!("{path}[{i}]"), format!("{message}, got {v}")));
        }
        if values[..i].contains(&v) {
            return Err(config_error(&format!("{path}[{i}]"), format!("duplicate value {v}")));
        }
    }
    Ok(())
}
