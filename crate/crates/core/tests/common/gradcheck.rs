use codes_core::nn::Activation;
use codes_core::surrogates::{
    Architecture, Batch, FcnnSpec, LatentOdeSpec, LatentPolySpec, MultiOnetSpec, SurrogateKind, SurrogateModel,
    SurrogateSpec,
};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gradient checks pass below this.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
pub const GRADIENT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

pub fn toy_spec(kind: SurrogateKind) -> SurrogateSpec {
    let mut spec = SurrogateSpec::default_for(kind, 3);
    spec.architecture = match kind {
        SurrogateKind::FullyConnected => Architecture::FullyConnected(FcnnSpec {
            hidden: vec![8, 6],
            activation: Activation::Tanh,
        }),
        SurrogateKind::MultiOnet => Architecture::MultiOnet(MultiOnetSpec {
            branch_hidden: vec![8, 8],
            trunk_hidden: vec![7],
            outputs_per_quantity: 2,
            activation: Activation::LeakyRelu,
        }),
        SurrogateKind::LatentNeuralOde => Architecture::LatentNeuralOde(LatentOdeSpec {
            encoder_hidden: vec![8, 5],
            latent_dim: 3,
            activation: Activation::Relu,
            ode_hidden: vec![6],
            ode_activation: Activation::Softplus,
            substeps: 3,
        }),
        SurrogateKind::LatentPoly => Architecture::LatentPoly(LatentPolySpec {
            encoder_hidden: vec![8, 5],
            latent_dim: 2,
            activation: Activation::Relu,
            degree: 3,
        }),
    };
    spec
}

pub fn toy_batch(seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y0 = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
    let targets = Array3::from_shape_fn((2, 4, 3), |_| rng.random_range(-1.0..1.0));
    Batch {
        y0,
        times: vec![0.0, 0.3, 0.55, 1.0],
        targets,
    }
}

fn flat_params(model: &mut SurrogateModel) -> Vec<f64> {
    model.param_blocks_mut().into_iter().flat_map(|b| b.to_vec()).collect()
}

fn set_flat(model: &mut SurrogateModel, flat: &[f64]) {
    let mut off = 0;
    for block in model.param_blocks_mut() {
        let n = block.len();
        block.copy_from_slice(&flat[off..off + n]);
        off += n;
    }
}

/// Largest per-component relative error between analytic and central-difference gradients.
pub fn max_gradient_error(kind: SurrogateKind, seed: u64) -> f64 {
    let mut model = SurrogateModel::build(toy_spec(kind), seed.wrapping_mul(31).wrapping_add(11)).unwrap();
    if let Architecture::LatentPoly(_) = model.spec.architecture {
        // Nonzero coefficients so every term of the polynomial participates.
        for (i, c) in model.coeffs.iter_mut().enumerate() {
            *c = 0.1 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    let batch = toy_batch(seed.wrapping_add(5));
    let (_, grads) = model.loss_and_grad(&batch).unwrap();
    let analytic: Vec<f64> = grads.nets.iter().flatten().chain(grads.coeffs.iter()).copied().collect();
    let base = flat_params(&mut model);
    assert_eq!(base.len(), analytic.len());
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        set_flat(&mut model, &p);
        let up = model.loss_and_grad(&batch).unwrap().0;
        p[i] = base[i] - h;
        set_flat(&mut model, &p);
        let down = model.loss_and_grad(&batch).unwrap().0;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-3 * scale);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    set_flat(&mut model, &base);
    worst
}
