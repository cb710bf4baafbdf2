//! Analytic gradients of every architecture against central finite differences.

mod common;

use codes_core::surrogates::SurrogateKind;
use common::gradcheck::{max_gradient_error, GRADIENT_SEEDS, GRADIENT_TOLERANCE};

fn check(kind: SurrogateKind) {
    for seed in GRADIENT_SEEDS {
        let worst = max_gradient_error(kind, seed);
        assert!(worst < GRADIENT_TOLERANCE, "{kind} seed {seed}: max relative gradient error {worst:e}");
    }
}
#[test]
fn fcnn_gradient() {
    check(SurrogateKind::FullyConnected);
}

#[test]
fn multionet_gradient() {
    check(SurrogateKind::MultiOnet);
}

#[test]
fn latent_ode_gradient() {
    check(SurrogateKind::LatentNeuralOde);
}

#[test]
fn latent_poly_gradient() {
    check(SurrogateKind::LatentPoly);
}
