use std::fmt;
use std::str::FromStr;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEAKY_RELU_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    LeakyRelu,
    Softplus,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_RELU_SLOPE * z
                }
            }
            Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and the activation `a = apply(z)`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Softplus => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Softplus => "softplus",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "leaky_relu" | "leakyrelu" => Ok(Activation::LeakyRelu),
            "softplus" => Ok(Activation::Softplus),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

/// Dense network shape. Hidden layers use `activation`; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument("an MLP needs at least an input and an output layer".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("layer sizes must be >= 1, got {:?}", self.layer_sizes)));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offset of layer `l`'s weight block in the flat parameter vector; its bias follows.
    fn layer_offset(&self, l: usize) -> usize {
        self.layer_sizes.windows(2).take(l).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

pub fn param_count(spec: &MlpSpec) -> usize {
    spec.param_count()
}

/// Flat parameter vector. Layer `l` contributes its `[n_l, n_{l+1}]` row-major
/// weight matrix followed by its `n_{l+1}` biases, layers in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub data: Vec<f64>,
}

impl ParamStore {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            data: vec![0.0; spec.param_count()],
        }
    }

    /// Fan-in scaled uniform initialization, `U(-1/sqrt(n_in), 1/sqrt(n_in))` for weights and biases.
    pub fn init(spec: &MlpSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(spec.param_count());
        for w in spec.layer_sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                data.push(rng.random_range(-bound..bound));
            }
        }
        Self { data }
    }

    pub fn total_count(&self) -> usize {
        self.data.len()
    }
}

fn layer_views<'a>(spec: &MlpSpec, params: &'a [f64], l: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
    let (n_in, n_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
    let off = spec.layer_offset(l);
    let w = ArrayView2::from_shape((n_in, n_out), &params[off..off + n_in * n_out]).expect("weight block");
    let b = ArrayView1::from(&params[off + n_in * n_out..off + n_in * n_out + n_out]);
    (w, b)
}

fn layer_views_mut<'a>(
    spec: &MlpSpec,
    grads: &'a mut [f64],
    l: usize,
) -> (ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
    let (n_in, n_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
    let off = spec.layer_offset(l);
    let (w, b) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
    (
        ArrayViewMut2::from_shape((n_in, n_out), w).expect("weight grad block"),
        ArrayViewMut1::from(b),
    )
}

/// Intermediate values kept by [`Mlp::forward_cached`] for the reverse pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Array2<f64>>,
}

/// A spec bound to its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: ParamStore,
}

impl Mlp {
    pub fn new(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let params = ParamStore::init(&spec, seed);
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::Shape(format!(
                "parameter vector has {} entries, spec needs {}",
                params.len(),
                spec.param_count()
            )));
        }
        Ok(Self {
            spec,
            params: ParamStore { data: params },
        })
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.spec.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.spec.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(forward_raw(&self.spec, &self.params.data, x, None))
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.spec.n_layers()),
            pre: Vec::with_capacity(self.spec.n_layers().saturating_sub(1)),
        };
        let y = forward_raw(&self.spec, &self.params.data, x, Some(&mut cache));
        Ok((y, cache))
    }

    /// Reverse pass. Parameter gradients are **added** into `param_grads`
    /// (same layout as the parameters); the gradient w.r.t. the input is returned.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<'_, f64>,
        param_grads: &mut [f64],
    ) -> Result<Array2<f64>> {
        let batch = cache.inputs[0].nrows();
        if upstream.dim() != (batch, self.spec.output_dim()) {
            return Err(Error::Shape(format!(
                "upstream gradient has shape {:?}, expected ({batch}, {})",
                upstream.dim(),
                self.spec.output_dim()
            )));
        }
        if param_grads.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "gradient buffer has {} entries, expected {}",
                param_grads.len(),
                self.param_count()
            )));
        }
        Ok(backward_raw(&self.spec, &self.params.data, cache, upstream, param_grads))
    }
}

fn forward_raw(spec: &MlpSpec, params: &[f64], x: ArrayView2<'_, f64>, mut cache: Option<&mut ForwardCache>) -> Array2<f64> {
    let n_layers = spec.n_layers();
    let mut a = x.to_owned();
    for l in 0..n_layers {
        let (w, b) = layer_views(spec, params, l);
        let mut z = a.dot(&w);
        z += &b;
        let last = l + 1 == n_layers;
        let next = if last {
            z
        } else {
            let act = spec.activation;
            let out = z.mapv(|v| act.apply(v));
            if let Some(c) = cache.as_deref_mut() {
                c.pre.push(z);
            }
            out
        };
        if let Some(c) = cache.as_deref_mut() {
            c.inputs.push(a);
        }
        a = next;
    }
    a
}

fn backward_raw(
    spec: &MlpSpec,
    params: &[f64],
    cache: &ForwardCache,
    upstream: ArrayView2<'_, f64>,
    grads: &mut [f64],
) -> Array2<f64> {
    let n_layers = spec.n_layers();
    let act = spec.activation;
    let mut delta = upstream.to_owned();
    for l in (0..n_layers).rev() {
        let input = &cache.inputs[l];
        let (w, _) = layer_views(spec, params, l);
        {
            let (mut gw, mut gb) = layer_views_mut(spec, grads, l);
            general_mat_mul(1.0, &input.t(), &delta, 1.0, &mut gw);
            gb += &delta.sum_axis(Axis(0));
        }
        let mut d_input = delta.dot(&w.t());
        if l > 0 {
            // input of layer l is the activation of hidden layer l-1
            let z = &cache.pre[l - 1];
            ndarray::Zip::from(&mut d_input)
                .and(z)
                .and(input)
                .for_each(|d, &zv, &av| *d *= act.derivative(zv, av));
        }
        delta = d_input;
    }
    delta
}

/// Forward pass with an explicit parameter slice.
pub fn mlp_forward(spec: &MlpSpec, params: &ParamStore, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if params.data.len() != spec.param_count() {
        return Err(Error::Shape("parameter count does not match spec".into()));
    }
    if x.ncols() != spec.input_dim() {
        return Err(Error::Shape(format!("input has {} columns, network expects {}", x.ncols(), spec.input_dim())));
    }
    Ok(forward_raw(spec, &params.data, x, None))
}

/// Gradients of `sum(upstream * mlp(x))` with respect to the parameters and the input.
pub fn backward(
    spec: &MlpSpec,
    params: &ParamStore,
    x: ArrayView2<'_, f64>,
    upstream: ArrayView2<'_, f64>,
) -> Result<(Vec<f64>, Array2<f64>)> {
    let mlp = Mlp::from_params(spec.clone(), params.data.clone())?;
    let (_, cache) = mlp.forward_cached(x)?;
    let mut grads = vec![0.0; spec.param_count()];
    let dx = mlp.backward(&cache, upstream, &mut grads)?;
    Ok((grads, dx))
}
