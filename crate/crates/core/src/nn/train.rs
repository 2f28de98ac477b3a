use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{bail, Result};
use crate::nn::adam::{adam_step, AdamConfig, OptimizerState};
use crate::nn::grad::{compute_gradients, LossSpec};
use crate::nn::model::Model;
use crate::rng::{self, stream};

/// Supervised minibatch training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub temperature: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            optimizer: AdamConfig::default(),
            temperature: 1.0,
        }
    }
}

/// Trains with softmax cross-entropy over seeded per-epoch shuffles.
pub fn train(model: Model, dataset: &Dataset, config: &TrainConfig, seed: u64) -> Result<Model> {
    train_observed(model, dataset, config, seed, &mut |_| {})
}

/// [`train`], reporting the dataset row indices of every minibatch to
/// `observer` before the update is applied.
pub fn train_observed(
    mut model: Model,
    dataset: &Dataset,
    config: &TrainConfig,
    seed: u64,
    observer: &mut dyn FnMut(&[usize]),
) -> Result<Model> {
    if config.batch_size == 0 {
        bail!(Parameter, "batch size must be positive");
    }
    if config.epochs == 0 {
        return Ok(model);
    }
    let mut state = OptimizerState::new(&model, config.optimizer)?;
    let mut rng = rng::seeded(seed, stream::TRAIN_SHUFFLE);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            observer(batch);
            let inputs = dataset.features().select_rows(batch);
            let labels: Vec<usize> = batch.iter().map(|&i| dataset.labels()[i]).collect();
            let spec = LossSpec::RetainCe {
                inputs: &inputs,
                labels: &labels,
                temperature: config.temperature,
            };
            let (_, grads) = compute_gradients(&model, &spec)?;
            adam_step(&mut model, &grads, &mut state)?;
        }
    }
    Ok(model)
}
