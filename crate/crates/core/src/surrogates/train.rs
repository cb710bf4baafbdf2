use ndarray::{Array2, Array3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Batch, SurrogateModel};
use crate::dataset::{TrainingSubset, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::nn::AdamState;

const SHUFFLE_STREAM_TAG: u64 = 0x5348_5546_464c_4521;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Normalized training tensors for one subset.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub y0: Array2<f64>,
    pub times: Vec<f64>,
    pub targets: Array3<f64>,
}

impl TrainingData {
    /// Initial conditions always come from t = 0 of each selected sample; targets
    /// are restricted to the subset's timesteps.
    pub fn from_subset(model: &SurrogateModel, ds: &TrajectoryDataset, subset: &TrainingSubset) -> Result<Self> {
        let values = subset.select(ds)?;
        let y0_lin = ds.train.select(Axis(0), &subset.sample_indices).index_axis(Axis(1), 0).to_owned();
        let grid = ds.time_grid();
        Ok(Self {
            y0: model.transform.apply(&y0_lin)?,
            times: subset
                .time_indices
                .iter()
                .map(|&i| model.transform.normalize_time(grid[i]))
                .collect(),
            targets: model.transform.apply(&values)?,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.y0.nrows()
    }

    pub fn batch(&self, rows: &[usize]) -> Batch {
        Batch {
            y0: self.y0.select(Axis(0), rows),
            times: self.times.clone(),
            targets: self.targets.select(Axis(0), rows),
        }
    }
}

/// Trains `model` in place with the schedule in its spec and returns the per-epoch history.
/// Validation loss is measured on the full val split after every epoch.
pub fn train(model: &mut SurrogateModel, ds: &TrajectoryDataset, subset: &TrainingSubset, seed: u64) -> Result<Vec<EpochRecord>> {
    let data = TrainingData::from_subset(model, ds, subset)?;
    let grid = ds.time_grid();
    let training = model.spec.training.clone();
    let mut optimizers: Vec<AdamState> = model.param_blocks_mut().iter().map(|b| AdamState::new(b.len())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_STREAM_TAG);
    let mut order: Vec<usize> = (0..data.n_samples()).collect();
    let mut history = Vec::with_capacity(training.epochs);

    for epoch in 0..training.epochs {
        let lr = training.schedule.at(epoch, training.epochs.saturating_sub(1));
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for rows in order.chunks(training.batch_size) {
            let batch = data.batch(rows);
            let (loss, grads) = model.loss_and_grad(&batch).map_err(|e| divergence(epoch, e))?;
            weighted += loss * rows.len() as f64;
            let grad_blocks = grads.nets.iter().map(Vec::as_slice).chain((!grads.coeffs.is_empty()).then_some(grads.coeffs.as_slice()));
            for ((params, g), opt) in model.param_blocks_mut().into_iter().zip(grad_blocks).zip(&mut optimizers) {
                opt.step(params, g, lr).map_err(|e| divergence(epoch, e))?;
            }
        }
        let train_loss = weighted / data.n_samples() as f64;
        let val_loss = if ds.counts.n_val > 0 {
            model.evaluate_loss(ds.val.view(), &grid).map_err(|e| divergence(epoch, e))?
        } else {
            f64::NAN
        };
        if ds.counts.n_val > 0 && !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!("validation loss is {val_loss}"),
            });
        }
        model.epochs_trained += 1;
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
        });
    }
    Ok(history)
}

fn divergence(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(detail) => Error::Divergence { epoch, detail },
        other => other,
    }
}
