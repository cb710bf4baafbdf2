//! Synthetic coupled ODE systems and seeded dataset generation.

mod dopri;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dopri::{integrate_dense, DopriOptions};

use crate::dataset::TrajectoryDataset;
use crate::error::{Error, Result};

/// Substream tags XOR-ed into the dataset seed. Each split draws its initial
/// conditions from its own `ChaCha8Rng` stream.
pub const TRAIN_STREAM_TAG: u64 = 0x7472_6169_6e5f_5f5f;
pub const VAL_STREAM_TAG: u64 = 0x7661_6c5f_5f5f_5f5f;
pub const TEST_STREAM_TAG: u64 = 0x7465_7374_5f5f_5f5f;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    LotkaVolterra,
    SimpleOde,
    SimpleReaction,
}

impl SystemId {
    pub const ALL: [SystemId; 3] = [SystemId::LotkaVolterra, SystemId::SimpleOde, SystemId::SimpleReaction];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::LotkaVolterra => "lotka_volterra",
            SystemId::SimpleOde => "simple_ode",
            SystemId::SimpleReaction => "simple_reaction",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            SystemId::LotkaVolterra => 6,
            SystemId::SimpleOde => 5,
            SystemId::SimpleReaction => 6,
        }
    }

    pub fn labels(self) -> Vec<String> {
        let names: &[&str] = match self {
            SystemId::LotkaVolterra => &["p1", "p2", "p3", "q1", "q2", "q3"],
            SystemId::SimpleOde => &["n0", "n1", "n2", "n3", "n4"],
            SystemId::SimpleReaction => &["s1", "s2", "s3", "s4", "s5", "s6"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::UnknownDataset(s.to_string()))
    }
}

/// One of the synthetic systems together with its sampling box and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSystem {
    pub id: SystemId,
    pub ic_low: Vec<f64>,
    pub ic_high: Vec<f64>,
    pub t_end: f64,
}

impl OdeSystem {
    /// Initial conditions uniform on `[0.1, 2.0]` per component; `t_end` is 100
    /// for the predator/prey system and 10 otherwise.
    pub fn new(id: SystemId) -> Self {
        let dim = id.dim();
        let t_end = match id {
            SystemId::LotkaVolterra => 100.0,
            SystemId::SimpleOde | SystemId::SimpleReaction => 10.0,
        };
        Self {
            id,
            ic_low: vec![0.1; dim],
            ic_high: vec![2.0; dim],
            t_end,
        }
    }

    pub fn dim(&self) -> usize {
        self.id.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.ic_low.len() != dim || self.ic_high.len() != dim {
            return Err(Error::Invariant(format!("{}: sampling bounds must have length {dim}", self.id)));
        }
        for (lo, hi) in self.ic_low.iter().zip(&self.ic_high) {
            if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo <= hi) {
                return Err(Error::Invariant(format!(
                    "{}: sampling bounds need 0 <= low <= high, got [{lo}, {hi}]",
                    self.id
                )));
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Invariant(format!("{}: t_end must be positive", self.id)));
        }
        Ok(())
    }

    /// Evaluates the right-hand side into `dy`.
    pub fn rhs_into(&self, y: &[f64], dy: &mut [f64]) {
        match self.id {
            SystemId::LotkaVolterra => {
                let (p1, p2, p3, q1, q2, q3) = (y[0], y[1], y[2], y[3], y[4], y[5]);
                dy[0] = 0.5 * p1 - 0.02 * p1 * q1 - 0.01 * p1 * q2;
                dy[1] = 0.6 * p2 - 0.03 * p2 * q1 - 0.015 * p2 * q3;
                dy[2] = 0.4 * p3 - 0.01 * p3 * q2 - 0.025 * p3 * q3;
                dy[3] = -0.1 * q1 + 0.005 * p1 * q1 + 0.007 * p2 * q1;
                dy[4] = -0.08 * q2 + 0.006 * p1 * q2 + 0.009 * p3 * q2;
                dy[5] = -0.12 * q3 + 0.008 * p2 * q3 + 0.01 * p3 * q3;
            }
            SystemId::SimpleOde => {
                let (n0, n1, n2) = (y[0], y[1], y[2]);
                dy[0] = -0.8 * n0 - 0.2 * n0 * n2;
                dy[1] = 0.8 * n0 - 0.5 * n1 + 0.4 * n0 * n2;
                dy[2] = 0.5 * n1 - 0.2 * n0 * n2;
                dy[3] = 0.2 * n0 + 0.625 * n1;
                // kept as two terms, net coefficient 1.1
                dy[4] = 1.6 * n0 * n2 - 0.5 * n0 * n2;
            }
            SystemId::SimpleReaction => {
                let (s1, s2, s3, s4, s5) = (y[0], y[1], y[2], y[3], y[4]);
                dy[0] = -0.1 * s1 + 0.1 * s2;
                dy[1] = 0.1 * s1 - 0.15 * s2 + 0.05 * s3;
                dy[2] = 0.15 * s2 - 0.1 * s3 + 0.03 * s4;
                dy[3] = 0.1 * s3 - 0.07 * s4 + 0.01 * s5;
                dy[4] = 0.07 * s4 - 0.05 * s5;
                dy[5] = 0.05 * s5;
            }
        }
    }

    pub fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::Shape(format!("{} expects a state of length {}, got {}", self.id, self.dim(), y.len())));
        }
        let mut dy = vec![0.0; y.len()];
        self.rhs_into(y, &mut dy);
        Ok(dy)
    }

    /// Integrates from `y0` and samples at `t_grid` (which must start at 0).
    pub fn integrate(&self, y0: &[f64], t_grid: &[f64], rtol: f64, atol: f64) -> Result<Array2<f64>> {
        if y0.len() != self.dim() {
            return Err(Error::Shape(format!("{} expects y0 of length {}, got {}", self.id, self.dim(), y0.len())));
        }
        if t_grid.first().is_some_and(|&t0| t0 != 0.0) {
            return Err(Error::InvalidArgument("t_grid must start at 0".into()));
        }
        let opts = DopriOptions {
            rtol,
            atol,
            ..DopriOptions::default()
        };
        let flat = integrate_dense(|y, dy| self.rhs_into(y, dy), y0, t_grid, &opts)?;
        Ok(Array2::from_shape_vec((t_grid.len(), self.dim()), flat).expect("integrator output shape"))
    }

    /// `n` rows drawn uniformly on `[ic_low, ic_high)` from `ChaCha8Rng::seed_from_u64(seed)`.
    pub fn sample_initial_conditions(&self, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.dim();
        Array2::from_shape_fn((n, dim), |(_, j)| {
            let u: f64 = rng.random();
            self.ic_low[j] + (self.ic_high[j] - self.ic_low[j]) * u
        })
    }

    pub fn uniform_grid(&self, n_timesteps: usize) -> Vec<f64> {
        match n_timesteps {
            0 => Vec::new(),
            1 => vec![0.0],
            n => (0..n).map(|i| self.t_end * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSizes {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_timesteps: usize,
}

impl Default for GenerationSizes {
    fn default() -> Self {
        Self {
            n_train: 500,
            n_val: 50,
            n_test: 150,
            n_timesteps: 100,
        }
    }
}

pub const DEFAULT_RTOL: f64 = 1e-8;
pub const DEFAULT_ATOL: f64 = 1e-10;

/// Samples, integrates and assembles a validated dataset.
pub fn generate_dataset(system: &OdeSystem, sizes: GenerationSizes, seed: u64) -> Result<TrajectoryDataset> {
    system.validate()?;
    if sizes.n_train == 0 || sizes.n_val == 0 || sizes.n_test == 0 || sizes.n_timesteps == 0 {
        return Err(Error::InvalidArgument("all dataset counts must be at least 1".into()));
    }
    let grid = system.uniform_grid(sizes.n_timesteps);
    let split = |n: usize, tag: u64, offset: usize| -> Result<Array3<f64>> {
        let ics = system.sample_initial_conditions(n, seed ^ tag);
        let rows: Vec<Result<Array2<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let y0 = ics.row(i).to_vec();
                system
                    .integrate(&y0, &grid, DEFAULT_RTOL, DEFAULT_ATOL)
                    .map_err(|e| Error::Sample {
                        index: offset + i,
                        source: Box::new(e),
                    })
            })
            .collect();
        let mut out = Array3::zeros((n, sizes.n_timesteps, system.dim()));
        for (i, row) in rows.into_iter().enumerate() {
            out.index_axis_mut(Axis(0), i).assign(&row?);
        }
        Ok(out)
    };
    let train = split(sizes.n_train, TRAIN_STREAM_TAG, 0)?;
    let val = split(sizes.n_val, VAL_STREAM_TAG, sizes.n_train)?;
    let test = split(sizes.n_test, TEST_STREAM_TAG, sizes.n_train + sizes.n_val)?;
    TrajectoryDataset::new(train, val, test, Some(grid), Some(system.id.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_ode_zero_state_is_stationary() {
        let sys = OdeSystem::new(SystemId::SimpleOde);
        assert_eq!(sys.rhs(&[0.0; 5]).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn lotka_volterra_prey_growth_rates() {
        let sys = OdeSystem::new(SystemId::LotkaVolterra);
        let dy = sys.rhs(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(dy, vec![0.5, 0.6, 0.4, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn simple_reaction_first_species() {
        let sys = OdeSystem::new(SystemId::SimpleReaction);
        let dy = sys.rhs(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(dy, vec![-0.1, 0.1, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rhs_rejects_wrong_dimension() {
        let sys = OdeSystem::new(SystemId::SimpleOde);
        assert!(matches!(sys.rhs(&[1.0; 6]), Err(Error::Shape(_))));
    }

    #[test]
    fn single_point_grid_returns_y0() {
        for id in SystemId::ALL {
            let sys = OdeSystem::new(id);
            let y0 = vec![0.3; sys.dim()];
            let out = sys.integrate(&y0, &[0.0], 1e-8, 1e-10).unwrap();
            assert_eq!(out.shape(), &[1, sys.dim()]);
            assert_eq!(out.row(0).to_vec(), y0);
        }
    }

    #[test]
    fn lone_prey_grows_exponentially() {
        let sys = OdeSystem::new(SystemId::LotkaVolterra);
        let grid = sys.uniform_grid(100);
        let out = sys.integrate(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &grid, 1e-10, 1e-12).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let exact = (0.5 * t).exp();
            assert!(((out[[i, 0]] - exact) / exact).abs() < 1e-8, "t={t}");
            assert!(out.row(i).iter().skip(1).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn degenerate_sampling_box() {
        let mut sys = OdeSystem::new(SystemId::SimpleOde);
        sys.ic_low = vec![0.7; 5];
        sys.ic_high = vec![0.7; 5];
        let ics = sys.sample_initial_conditions(4, 9);
        assert!(ics.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn sampling_is_seeded() {
        let sys = OdeSystem::new(SystemId::SimpleReaction);
        assert_eq!(sys.sample_initial_conditions(8, 42), sys.sample_initial_conditions(8, 42));
        assert_ne!(sys.sample_initial_conditions(8, 42), sys.sample_initial_conditions(8, 43));
    }

    #[test]
    fn uniform_sample_mean_within_three_standard_errors() {
        let sys = OdeSystem::new(SystemId::SimpleOde);
        let n = 10_000;
        let ics = sys.sample_initial_conditions(n, 123);
        let width: f64 = 2.0 - 0.1;
        let se = width / 12f64.sqrt() / (n as f64).sqrt();
        for j in 0..5 {
            let mean = ics.column(j).mean().unwrap();
            assert!((mean - 1.05).abs() < 3.0 * se, "component {j}: mean {mean}");
        }
    }

    #[test]
    fn unknown_system_name() {
        assert!(matches!("bogus".parse::<SystemId>(), Err(Error::UnknownDataset(_))));
        assert_eq!("simple_ode".parse::<SystemId>().unwrap(), SystemId::SimpleOde);
    }
}
