//! The four surrogate architectures, their exact gradients, training and checkpoints.
//!
//! All models work internally on normalized values and normalized time
//! (`t / time_scale`); [`Predictor::predict`] maps linear inputs to linear outputs.

mod model;
mod ops;
mod spec;
mod train;

pub use model::{Batch, Gradients, Predictor, SurrogateModel};
pub use ops::{latentode_evolve, latentpoly_evolve, multionet_combine};
pub use spec::{
    Architecture, FcnnSpec, LatentOdeSpec, LatentPolySpec, MultiOnetSpec, SurrogateKind, SurrogateOverrides,
    SurrogateSpec, TrainingSpec, DEFAULT_BATCH_SIZE,
};
pub use train::{train, EpochRecord, TrainingData};

use crate::error::Result;

pub fn build(spec: SurrogateSpec, seed: u64) -> Result<SurrogateModel> {
    SurrogateModel::build(spec, seed)
}
