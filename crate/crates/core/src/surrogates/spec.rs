use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, LrSchedule, MlpSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SurrogateKind {
    #[serde(rename = "FCNN")]
    FullyConnected,
    #[serde(rename = "MON")]
    MultiOnet,
    #[serde(rename = "LNODE")]
    LatentNeuralOde,
    #[serde(rename = "LP")]
    LatentPoly,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 4] = [
        SurrogateKind::FullyConnected,
        SurrogateKind::MultiOnet,
        SurrogateKind::LatentNeuralOde,
        SurrogateKind::LatentPoly,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SurrogateKind::FullyConnected => "FCNN",
            SurrogateKind::MultiOnet => "MON",
            SurrogateKind::LatentNeuralOde => "LNODE",
            SurrogateKind::LatentPoly => "LP",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            SurrogateKind::FullyConnected => "FullyConnected",
            SurrogateKind::MultiOnet => "MultiONet",
            SurrogateKind::LatentNeuralOde => "LatentNeuralODE",
            SurrogateKind::LatentPoly => "LatentPoly",
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SurrogateKind::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s) || k.long_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown surrogate `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcnnSpec {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiOnetSpec {
    pub branch_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
    /// Latent outputs per quantity in both branch and trunk.
    pub outputs_per_quantity: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentOdeSpec {
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub activation: Activation,
    pub ode_hidden: Vec<usize>,
    pub ode_activation: Activation,
    /// RK4 substeps between adjacent output times.
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPolySpec {
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub activation: Activation,
    /// Highest power of `t`; coefficients exist for powers `1..=degree`.
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Architecture {
    #[serde(rename = "FCNN")]
    FullyConnected(FcnnSpec),
    #[serde(rename = "MON")]
    MultiOnet(MultiOnetSpec),
    #[serde(rename = "LNODE")]
    LatentNeuralOde(LatentOdeSpec),
    #[serde(rename = "LP")]
    LatentPoly(LatentPolySpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSpec {
    pub epochs: usize,
    /// Trajectories per optimizer step; every retained timestep of each is a target.
    pub batch_size: usize,
    pub schedule: LrSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub n_quantities: usize,
    pub architecture: Architecture,
    pub training: TrainingSpec,
}

pub const DEFAULT_BATCH_SIZE: usize = 16;

impl SurrogateSpec {
    /// Architecture defaults with desk-scale epochs (a tenth of the reference budgets).
    pub fn default_for(kind: SurrogateKind, n_quantities: usize) -> Self {
        let (architecture, epochs, schedule) = match kind {
            SurrogateKind::FullyConnected => (
                Architecture::FullyConnected(FcnnSpec {
                    hidden: vec![400, 400],
                    activation: Activation::Tanh,
                }),
                100,
                LrSchedule::Constant { lr: 1.5e-5 },
            ),
            SurrogateKind::MultiOnet => (
                Architecture::MultiOnet(MultiOnetSpec {
                    branch_hidden: vec![150; 4],
                    trunk_hidden: vec![150; 7],
                    outputs_per_quantity: 40,
                    activation: Activation::LeakyRelu,
                }),
                100,
                LrSchedule::Constant { lr: 5e-4 },
            ),
            SurrogateKind::LatentNeuralOde => (
                Architecture::LatentNeuralOde(LatentOdeSpec {
                    encoder_hidden: vec![184, 92, 46],
                    latent_dim: 9,
                    activation: Activation::Relu,
                    ode_hidden: vec![128, 128],
                    ode_activation: Activation::Softplus,
                    substeps: 16,
                }),
                1000,
                LrSchedule::ExponentialDecay {
                    initial: 5e-3,
                    floor: 1e-5,
                },
            ),
            SurrogateKind::LatentPoly => (
                Architecture::LatentPoly(LatentPolySpec {
                    encoder_hidden: vec![200, 100, 50],
                    latent_dim: 5,
                    activation: Activation::Relu,
                    degree: 6,
                }),
                1500,
                LrSchedule::Constant { lr: 2e-3 },
            ),
        };
        Self {
            n_quantities,
            architecture,
            training: TrainingSpec {
                epochs,
                batch_size: DEFAULT_BATCH_SIZE,
                schedule,
            },
        }
    }

    pub fn kind(&self) -> SurrogateKind {
        match self.architecture {
            Architecture::FullyConnected(_) => SurrogateKind::FullyConnected,
            Architecture::MultiOnet(_) => SurrogateKind::MultiOnet,
            Architecture::LatentNeuralOde(_) => SurrogateKind::LatentNeuralOde,
            Architecture::LatentPoly(_) => SurrogateKind::LatentPoly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("{}: {m}", self.kind())));
        if self.n_quantities == 0 {
            return bad("n_quantities must be >= 1".into());
        }
        if self.training.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        let lr_ok = |x: f64| x.is_finite() && x > 0.0;
        match self.training.schedule {
            LrSchedule::Constant { lr } if !lr_ok(lr) => return bad(format!("learning rate {lr} must be positive")),
            LrSchedule::ExponentialDecay { initial, floor } if !(lr_ok(initial) && lr_ok(floor)) => {
                return bad("learning rates must be positive".into())
            }
            _ => {}
        }
        match &self.architecture {
            Architecture::MultiOnet(m) if m.outputs_per_quantity == 0 => return bad("outputs_per_quantity must be >= 1".into()),
            Architecture::LatentNeuralOde(l) if l.latent_dim == 0 || l.substeps == 0 => {
                return bad("latent_dim and substeps must be >= 1".into())
            }
            Architecture::LatentPoly(l) if l.latent_dim == 0 || l.degree == 0 => {
                return bad("latent_dim and degree must be >= 1".into())
            }
            _ => {}
        }
        for net in self.network_specs() {
            net.1.validate()?;
        }
        Ok(())
    }

    /// Named network shapes in parameter-block order.
    pub fn network_specs(&self) -> Vec<(&'static str, MlpSpec)> {
        let q = self.n_quantities;
        let chain = |input: usize, hidden: &[usize], output: usize| {
            let mut v = Vec::with_capacity(hidden.len() + 2);
            v.push(input);
            v.extend_from_slice(hidden);
            v.push(output);
            v
        };
        let mirrored = |hidden: &[usize]| hidden.iter().rev().copied().collect::<Vec<_>>();
        match &self.architecture {
            Architecture::FullyConnected(f) => vec![(
                "network",
                MlpSpec {
                    layer_sizes: chain(q + 1, &f.hidden, q),
                    activation: f.activation,
                },
            )],
            Architecture::MultiOnet(m) => vec![
                (
                    "branch",
                    MlpSpec {
                        layer_sizes: chain(q, &m.branch_hidden, m.outputs_per_quantity * q),
                        activation: m.activation,
                    },
                ),
                (
                    "trunk",
                    MlpSpec {
                        layer_sizes: chain(1, &m.trunk_hidden, m.outputs_per_quantity * q),
                        activation: m.activation,
                    },
                ),
            ],
            Architecture::LatentNeuralOde(l) => vec![
                (
                    "encoder",
                    MlpSpec {
                        layer_sizes: chain(q, &l.encoder_hidden, l.latent_dim),
                        activation: l.activation,
                    },
                ),
                (
                    "ode",
                    MlpSpec {
                        layer_sizes: chain(l.latent_dim, &l.ode_hidden, l.latent_dim),
                        activation: l.ode_activation,
                    },
                ),
                (
                    "decoder",
                    MlpSpec {
                        layer_sizes: chain(l.latent_dim, &mirrored(&l.encoder_hidden), q),
                        activation: l.activation,
                    },
                ),
            ],
            Architecture::LatentPoly(l) => vec![
                (
                    "encoder",
                    MlpSpec {
                        layer_sizes: chain(q, &l.encoder_hidden, l.latent_dim),
                        activation: l.activation,
                    },
                ),
                (
                    "decoder",
                    MlpSpec {
                        layer_sizes: chain(l.latent_dim, &mirrored(&l.encoder_hidden), q),
                        activation: l.activation,
                    },
                ),
            ],
        }
    }

    pub fn param_count(&self) -> usize {
        let nets: usize = self.network_specs().iter().map(|(_, s)| s.param_count()).sum();
        let extra = match &self.architecture {
            Architecture::LatentPoly(l) => l.latent_dim * l.degree,
            _ => 0,
        };
        nets + extra
    }
}

/// Optional per-surrogate hyperparameter overrides, as accepted in config files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lr_floor: Option<f64>,
    pub activation: Option<Activation>,
    pub hidden: Option<Vec<usize>>,
    pub trunk_hidden: Option<Vec<usize>>,
    pub outputs_per_quantity: Option<usize>,
    pub latent_dim: Option<usize>,
    pub ode_hidden: Option<Vec<usize>>,
    pub ode_activation: Option<Activation>,
    pub substeps: Option<usize>,
    pub degree: Option<usize>,
}

impl SurrogateOverrides {
    /// Applies the overrides, rejecting keys that have no meaning for the architecture.
    pub fn apply(&self, spec: &mut SurrogateSpec) -> Result<()> {
        let kind = spec.kind();
        let reject = |key: &str| Err(Error::InvalidArgument(format!("`{key}` does not apply to {kind}")));
        if let Some(e) = self.epochs {
            spec.training.epochs = e;
        }
        if let Some(b) = self.batch_size {
            spec.training.batch_size = b;
        }
        match (&mut spec.training.schedule, self.learning_rate, self.lr_floor) {
            (LrSchedule::Constant { lr }, l, None) => {
                if let Some(l) = l {
                    *lr = l;
                }
            }
            (LrSchedule::Constant { lr }, l, Some(floor)) => {
                let initial = l.unwrap_or(*lr);
                spec.training.schedule = LrSchedule::ExponentialDecay { initial, floor };
            }
            (LrSchedule::ExponentialDecay { initial, floor }, l, f) => {
                if let Some(l) = l {
                    *initial = l;
                }
                if let Some(f) = f {
                    *floor = f;
                }
            }
        }
        match &mut spec.architecture {
            Architecture::FullyConnected(f) => {
                if let Some(h) = &self.hidden {
                    f.hidden = h.clone();
                }
                if let Some(a) = self.activation {
                    f.activation = a;
                }
                for (key, set) in [
                    ("trunk_hidden", self.trunk_hidden.is_some()),
                    ("outputs_per_quantity", self.outputs_per_quantity.is_some()),
                    ("latent_dim", self.latent_dim.is_some()),
                    ("ode_hidden", self.ode_hidden.is_some()),
                    ("ode_activation", self.ode_activation.is_some()),
                    ("substeps", self.substeps.is_some()),
                    ("degree", self.degree.is_some()),
                ] {
                    if set {
                        return reject(key);
                    }
                }
            }
            Architecture::MultiOnet(m) => {
                if let Some(h) = &self.hidden {
                    m.branch_hidden = h.clone();
                }
                if let Some(h) = &self.trunk_hidden {
                    m.trunk_hidden = h.clone();
                }
                if let Some(p) = self.outputs_per_quantity {
                    m.outputs_per_quantity = p;
                }
                if let Some(a) = self.activation {
                    m.activation = a;
                }
                for (key, set) in [
                    ("latent_dim", self.latent_dim.is_some()),
                    ("ode_hidden", self.ode_hidden.is_some()),
                    ("ode_activation", self.ode_activation.is_some()),
                    ("substeps", self.substeps.is_some()),
                    ("degree", self.degree.is_some()),
                ] {
                    if set {
                        return reject(key);
                    }
                }
            }
            Architecture::LatentNeuralOde(l) => {
                if let Some(h) = &self.hidden {
                    l.encoder_hidden = h.clone();
                }
                if let Some(d) = self.latent_dim {
                    l.latent_dim = d;
                }
                if let Some(a) = self.activation {
                    l.activation = a;
                }
                if let Some(h) = &self.ode_hidden {
                    l.ode_hidden = h.clone();
                }
                if let Some(a) = self.ode_activation {
                    l.ode_activation = a;
                }
                if let Some(k) = self.substeps {
                    l.substeps = k;
                }
                for (key, set) in [
                    ("trunk_hidden", self.trunk_hidden.is_some()),
                    ("outputs_per_quantity", self.outputs_per_quantity.is_some()),
                    ("degree", self.degree.is_some()),
                ] {
                    if set {
                        return reject(key);
                    }
                }
            }
            Architecture::LatentPoly(l) => {
                if let Some(h) = &self.hidden {
                    l.encoder_hidden = h.clone();
                }
                if let Some(d) = self.latent_dim {
                    l.latent_dim = d;
                }
                if let Some(a) = self.activation {
                    l.activation = a;
                }
                if let Some(d) = self.degree {
                    l.degree = d;
                }
                for (key, set) in [
                    ("trunk_hidden", self.trunk_hidden.is_some()),
                    ("outputs_per_quantity", self.outputs_per_quantity.is_some()),
                    ("ode_hidden", self.ode_hidden.is_some()),
                    ("ode_activation", self.ode_activation.is_some()),
                    ("substeps", self.substeps.is_some()),
                ] {
                    if set {
                        return reject(key);
                    }
                }
            }
        }
        spec.validate()
    }
}
