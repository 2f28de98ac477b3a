//! Feedforward classifier with exact gradients and AdamW.

mod adam;
mod grad;
mod loss;
mod model;
mod train;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use grad::{compute_gradients, evaluate_loss, GradientSet, LossSpec};
pub use loss::{argmax, cross_entropy, softmax_with_temperature, LOG_CLAMP, NORM_CLAMP};
pub use model::{Architecture, Dense, Model};
pub use train::{train, train_observed, TrainConfig};

pub(crate) use loss::{cosine_similarity, mean_cosine_distance, predictions, softmax_row};
