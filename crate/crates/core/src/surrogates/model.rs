use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use super::ops::{check_grid, gather_outputs, multionet_combine, rk4_states, rk4_step_backward};
use super::spec::{Architecture, SurrogateKind, SurrogateSpec};
use crate::dataset::NormalizationTransform;
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Mlp};

/// Anything that maps initial conditions and a time grid to trajectories in linear space.
pub trait Predictor {
    /// `y0` is `[B, Q]`; the result is `[B, T, Q]`.
    fn predict(&self, y0: ArrayView2<'_, f64>, t_grid: &[f64]) -> Result<Array3<f64>>;
}

/// A training batch in normalized space.
#[derive(Debug, Clone)]
pub struct Batch {
    pub y0: Array2<f64>,
    pub times: Vec<f64>,
    pub targets: Array3<f64>,
}

/// Gradients laid out like [`SurrogateModel::nets`] plus the polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub nets: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub spec: SurrogateSpec,
    pub seed: u64,
    pub transform: NormalizationTransform,
    /// Sub-networks in [`SurrogateSpec::network_specs`] order.
    pub nets: Vec<Mlp>,
    /// LatentPoly coefficients, row-major `[latent_dim, degree]`; empty otherwise.
    pub coeffs: Vec<f64>,
    pub epochs_trained: usize,
}

const NET_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    surrogate: SurrogateKind,
    spec: SurrogateSpec,
    seed: u64,
    epochs_trained: usize,
    transform: NormalizationTransform,
    files: Vec<String>,
    param_count: usize,
}

impl SurrogateModel {
    /// Fresh model with seeded initial weights and an identity normalization.
    pub fn build(spec: SurrogateSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let nets = spec
            .network_specs()
            .into_iter()
            .enumerate()
            .map(|(i, (_, s))| Mlp::new(s, seed ^ NET_SEED_STRIDE.wrapping_mul(i as u64 + 1)))
            .collect::<Result<Vec<_>>>()?;
        let coeffs = match &spec.architecture {
            Architecture::LatentPoly(l) => vec![0.0; l.latent_dim * l.degree],
            _ => Vec::new(),
        };
        Ok(Self {
            transform: NormalizationTransform::identity(spec.n_quantities),
            spec,
            seed,
            nets,
            coeffs,
            epochs_trained: 0,
        })
    }

    pub fn with_transform(mut self, transform: NormalizationTransform) -> Result<Self> {
        if transform.n_quantities() != self.spec.n_quantities {
            return Err(Error::Shape(format!(
                "transform covers {} quantities, model has {}",
                transform.n_quantities(),
                self.spec.n_quantities
            )));
        }
        self.transform = transform;
        Ok(self)
    }

    pub fn kind(&self) -> SurrogateKind {
        self.spec.kind()
    }

    pub fn param_count(&self) -> usize {
        self.nets.iter().map(Mlp::param_count).sum::<usize>() + self.coeffs.len()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            nets: self.nets.iter().map(|n| vec![0.0; n.param_count()]).collect(),
            coeffs: vec![0.0; self.coeffs.len()],
        }
    }

    /// Mutable parameter blocks matching the layout of [`Gradients`].
    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut blocks: Vec<&mut [f64]> = self.nets.iter_mut().map(|n| n.params.data.as_mut_slice()).collect();
        if !self.coeffs.is_empty() {
            blocks.push(self.coeffs.as_mut_slice());
        }
        blocks
    }

    fn check_inputs(&self, y0: &ArrayView2<'_, f64>, times: &[f64]) -> Result<()> {
        if y0.ncols() != self.spec.n_quantities {
            return Err(Error::Shape(format!(
                "initial conditions have {} quantities, model expects {}",
                y0.ncols(),
                self.spec.n_quantities
            )));
        }
        check_grid(times)
    }

    /// Forward pass in normalized space, `[B, T, Q]`.
    pub fn forward_normalized(&self, y0: ArrayView2<'_, f64>, times: &[f64]) -> Result<Array3<f64>> {
        self.check_inputs(&y0, times)?;
        let (b, t, q) = (y0.nrows(), times.len(), self.spec.n_quantities);
        let flat = match &self.spec.architecture {
            Architecture::FullyConnected(_) => self.nets[0].forward(pair_inputs(y0, times).view())?,
            Architecture::MultiOnet(_) => {
                let branch = self.nets[0].forward(y0)?;
                let trunk = self.nets[1].forward(time_column(times).view())?;
                let rows_b = branch.select(Axis(0), &repeat_index(b, t));
                let rows_t = trunk.select(Axis(0), &tile_index(b, t));
                multionet_combine(rows_b.view(), rows_t.view(), q)?
            }
            Architecture::LatentPoly(l) => {
                let z0 = self.nets[0].forward(y0)?;
                let z = poly_latents(&z0, &self.coeffs, l.degree, times);
                self.nets[1].forward(z.view())?
            }
            Architecture::LatentNeuralOde(l) => {
                let z0 = self.nets[0].forward(y0)?;
                let (grid, offset) = grid_from_zero(times)?;
                let states = rk4_states(&self.nets[1], z0.view(), &grid, l.substeps)?;
                let z = gather_outputs(&states, grid.len(), l.substeps);
                let z = z.slice(s![.., offset.., ..]).to_owned();
                let flat = z.into_shape_with_order((b * t, l.latent_dim)).expect("contiguous latents");
                self.nets[2].forward(flat.view())?
            }
        };
        Ok(flat.into_shape_with_order((b, t, q)).expect("row-major output"))
    }

    /// Mean squared error in normalized space and its gradient.
    pub fn loss_and_grad(&self, batch: &Batch) -> Result<(f64, Gradients)> {
        let y0 = batch.y0.view();
        let times = batch.times.as_slice();
        self.check_inputs(&y0, times)?;
        let (b, t, q) = (y0.nrows(), times.len(), self.spec.n_quantities);
        if batch.targets.dim() != (b, t, q) {
            return Err(Error::Shape(format!(
                "targets have shape {:?}, expected ({b}, {t}, {q})",
                batch.targets.dim()
            )));
        }
        let mut grads = self.zero_gradients();
        let n = (b * t * q) as f64;
        let targets = batch.targets.view().into_shape_with_order((b * t, q)).expect("contiguous targets");
        let residual = |pred: &Array2<f64>| -> (f64, Array2<f64>) {
            let diff = pred - &targets;
            let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
            (loss, diff * (2.0 / n))
        };

        let loss = match &self.spec.architecture {
            Architecture::FullyConnected(_) => {
                let (pred, cache) = self.nets[0].forward_cached(pair_inputs(y0, times).view())?;
                let (loss, d) = residual(&pred);
                self.nets[0].backward(&cache, d.view(), &mut grads.nets[0])?;
                loss
            }
            Architecture::MultiOnet(m) => {
                let p = m.outputs_per_quantity;
                let (branch, cb) = self.nets[0].forward_cached(y0)?;
                let (trunk, ct) = self.nets[1].forward_cached(time_column(times).view())?;
                // Factored evaluation: out_q = B_q T_q^T for each quantity.
                let mut pred = Array2::zeros((b * t, q));
                for k in 0..q {
                    let o = branch.slice(s![.., k * p..(k + 1) * p]).dot(&trunk.slice(s![.., k * p..(k + 1) * p]).t());
                    pred.column_mut(k).assign(&Array1::from_iter(o.iter().copied()));
                }
                let (loss, d) = residual(&pred);
                let mut d_branch = Array2::zeros(branch.dim());
                let mut d_trunk = Array2::zeros(trunk.dim());
                for k in 0..q {
                    let g = Array2::from_shape_vec((b, t), d.column(k).to_vec()).expect("len");
                    d_branch
                        .slice_mut(s![.., k * p..(k + 1) * p])
                        .assign(&g.dot(&trunk.slice(s![.., k * p..(k + 1) * p])));
                    d_trunk
                        .slice_mut(s![.., k * p..(k + 1) * p])
                        .assign(&g.t().dot(&branch.slice(s![.., k * p..(k + 1) * p])));
                }
                let (gb, rest) = grads.nets.split_at_mut(1);
                self.nets[0].backward(&cb, d_branch.view(), &mut gb[0])?;
                self.nets[1].backward(&ct, d_trunk.view(), &mut rest[0])?;
                loss
            }
            Architecture::LatentPoly(l) => {
                let (z0, ce) = self.nets[0].forward_cached(y0)?;
                let z = poly_latents(&z0, &self.coeffs, l.degree, times);
                let (pred, cd) = self.nets[1].forward_cached(z.view())?;
                let (loss, d) = residual(&pred);
                let dz = self.nets[1].backward(&cd, d.view(), &mut grads.nets[1])?;
                let dz = dz.into_shape_with_order((b, t, l.latent_dim)).expect("contiguous");
                let dz0 = dz.sum_axis(Axis(1));
                for (ti, &tv) in times.iter().enumerate() {
                    let slab = dz.index_axis(Axis(1), ti).sum_axis(Axis(0));
                    let mut pw = 1.0;
                    for d in 0..l.degree {
                        pw *= tv;
                        for k in 0..l.latent_dim {
                            grads.coeffs[k * l.degree + d] += slab[k] * pw;
                        }
                    }
                }
                self.nets[0].backward(&ce, dz0.view(), &mut grads.nets[0])?;
                loss
            }
            Architecture::LatentNeuralOde(l) => {
                let k = l.substeps;
                let (z0, ce) = self.nets[0].forward_cached(y0)?;
                let (grid, offset) = grid_from_zero(times)?;
                let states = rk4_states(&self.nets[1], z0.view(), &grid, k)?;
                let z = gather_outputs(&states, grid.len(), k);
                let z = z.slice(s![.., offset.., ..]).to_owned();
                let flat = z.into_shape_with_order((b * t, l.latent_dim)).expect("contiguous");
                let (pred, cd) = self.nets[2].forward_cached(flat.view())?;
                let (loss, d) = residual(&pred);
                let dz = self.nets[2].backward(&cd, d.view(), &mut grads.nets[2])?;
                let dz = dz.into_shape_with_order((b, t, l.latent_dim)).expect("contiguous");
                let mut adj = Array2::zeros((b, l.latent_dim));
                for gi in (0..grid.len()).rev() {
                    if gi >= offset {
                        adj += &dz.index_axis(Axis(1), gi - offset);
                    }
                    if gi == 0 {
                        break;
                    }
                    let h = (grid[gi] - grid[gi - 1]) / k as f64;
                    for step in (0..k).rev() {
                        let idx = (gi - 1) * k + step;
                        rk4_step_backward(&self.nets[1], &states[idx], h, &mut adj, &mut grads.nets[1])?;
                    }
                }
                self.nets[0].backward(&ce, adj.view(), &mut grads.nets[0])?;
                loss
            }
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss is {loss}")));
        }
        Ok((loss, grads))
    }

    /// Normalized-space MSE over every sample and timestep of `values`.
    pub fn evaluate_loss(&self, values: ArrayView3<'_, f64>, t_grid: &[f64]) -> Result<f64> {
        let norm = self.transform.apply(&values)?;
        let times: Vec<f64> = t_grid.iter().map(|&t| self.transform.normalize_time(t)).collect();
        let y0 = norm.index_axis(Axis(1), 0).to_owned();
        let pred = self.forward_normalized(y0.view(), &times)?;
        let n = pred.len() as f64;
        Ok(pred.iter().zip(norm.iter()).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n)
    }

    /// Writes one checkpoint per parameter block and a `manifest.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        for ((name, spec), net) in self.spec.network_specs().into_iter().zip(&self.nets) {
            let file = format!("{name}.ckpt");
            let shape = spec.layer_sizes.clone();
            Checkpoint::new(name, Some(spec), shape, self.seed, self.epochs_trained, net.params.data.clone())
                .save(dir.join(&file))?;
            files.push(file);
        }
        if let Architecture::LatentPoly(l) = &self.spec.architecture {
            let file = "coefficients.ckpt".to_string();
            Checkpoint::new(
                "coefficients",
                None,
                vec![l.latent_dim, l.degree],
                self.seed,
                self.epochs_trained,
                self.coeffs.clone(),
            )
            .save(dir.join(&file))?;
            files.push(file);
        }
        let manifest = Manifest {
            format: "CODES-MODEL".into(),
            version: 1,
            surrogate: self.kind(),
            spec: self.spec.clone(),
            seed: self.seed,
            epochs_trained: self.epochs_trained,
            transform: self.transform.clone(),
            files,
            param_count: self.param_count(),
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("model manifest: {e}")))?;
        if m.format != "CODES-MODEL" || m.version != 1 {
            return Err(Error::Format(format!("unsupported model manifest {} v{}", m.format, m.version)));
        }
        let mut model = Self::build(m.spec, m.seed)?.with_transform(m.transform)?;
        let expected = model.nets.len() + usize::from(!model.coeffs.is_empty());
        if m.files.len() != expected {
            return Err(Error::Format(format!("manifest lists {} files, expected {expected}", m.files.len())));
        }
        for (i, file) in m.files.iter().enumerate() {
            let ckpt = Checkpoint::load(dir.join(file))?;
            let block = if i < model.nets.len() {
                if ckpt.header.spec.as_ref() != Some(&model.nets[i].spec) {
                    return Err(Error::Format(format!("checkpoint {file} does not match the model spec")));
                }
                &mut model.nets[i].params.data
            } else {
                &mut model.coeffs
            };
            if ckpt.params.len() != block.len() {
                return Err(Error::Format(format!("checkpoint {file} has the wrong parameter count")));
            }
            *block = ckpt.params;
        }
        model.epochs_trained = m.epochs_trained;
        if model.param_count() != m.param_count {
            return Err(Error::Format("manifest param_count disagrees with checkpoints".into()));
        }
        Ok(model)
    }
}

impl Predictor for SurrogateModel {
    fn predict(&self, y0: ArrayView2<'_, f64>, t_grid: &[f64]) -> Result<Array3<f64>> {
        let y0n = self.transform.apply(&y0)?;
        let times: Vec<f64> = t_grid.iter().map(|&t| self.transform.normalize_time(t)).collect();
        let norm = self.forward_normalized(y0n.view(), &times)?;
        self.transform.invert(&norm)
    }
}

/// Rows `[y0[b], t]` for every `(b, t)` pair, sample-major.
fn pair_inputs(y0: ArrayView2<'_, f64>, times: &[f64]) -> Array2<f64> {
    let (b, q) = y0.dim();
    let t = times.len();
    let mut x = Array2::zeros((b * t, q + 1));
    for bi in 0..b {
        for (ti, &tv) in times.iter().enumerate() {
            let mut row = x.row_mut(bi * t + ti);
            row.slice_mut(s![..q]).assign(&y0.row(bi));
            row[q] = tv;
        }
    }
    x
}

fn time_column(times: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((times.len(), 1), times.to_vec()).expect("column")
}

fn repeat_index(b: usize, t: usize) -> Vec<usize> {
    (0..b * t).map(|r| r / t).collect()
}

fn tile_index(b: usize, t: usize) -> Vec<usize> {
    (0..b * t).map(|r| r % t).collect()
}

/// Latent rows `[B * T, L]` of the polynomial evolution.
fn poly_latents(z0: &Array2<f64>, coeffs: &[f64], degree: usize, times: &[f64]) -> Array2<f64> {
    let (b, l) = z0.dim();
    let c = ArrayView2::from_shape((l, degree), coeffs).expect("coefficient layout");
    let mut z = Array2::zeros((b * times.len(), l));
    for (ti, &tv) in times.iter().enumerate() {
        let mut shift = vec![0.0; l];
        for (k, sk) in shift.iter_mut().enumerate() {
            let mut acc = 0.0;
            for d in (0..degree).rev() {
                acc = (acc + c[[k, d]]) * tv;
            }
            *sk = acc;
        }
        for bi in 0..b {
            let mut row = z.row_mut(bi * times.len() + ti);
            for k in 0..l {
                row[k] = z0[[bi, k]] + shift[k];
            }
        }
    }
    z
}

/// The encoder state lives at t = 0, so grids not starting there get it prepended.
fn grid_from_zero(times: &[f64]) -> Result<(Vec<f64>, usize)> {
    if times[0] < 0.0 {
        return Err(Error::InvalidArgument("latent ODE time grid must not start before 0".into()));
    }
    if times[0] == 0.0 {
        return Ok((times.to_vec(), 0));
    }
    let mut g = Vec::with_capacity(times.len() + 1);
    g.push(0.0);
    g.extend_from_slice(times);
    Ok((g, 1))
}
