//! Reference unlearning methods: retraining from scratch on the retain-set,
//! fine-tuning on the retain-set, gradient ascent on the forget-set, and
//! training the forget-set toward random wrong labels.
//!
//! Gradient ascent and random labels share the forget-accuracy stopping rule
//! of the centroid method; retraining and fine-tuning run a fixed number of
//! epochs.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{Scenario, SplitBundle};
use crate::duck::CR_TARGET_FORGET_ACCURACY;
use crate::error::{bail, Result};
use crate::metrics::accuracy;
use crate::nn::{
    adam_step, compute_gradients, train_observed, AdamConfig, Architecture, LossSpec, Model,
    OptimizerState, TrainConfig,
};
use crate::rng::{self, stream};

/// Loss magnitude beyond which gradient ascent is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    Retrain,
    Finetune,
    NegGrad,
    RandLabel,
}

impl BaselineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::Retrain => "retrain",
            BaselineMethod::Finetune => "finetune",
            BaselineMethod::NegGrad => "neg_grad",
            BaselineMethod::RandLabel => "rand_label",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    /// Fixed budget for retraining and fine-tuning.
    pub epochs: usize,
    /// Cap for the accuracy-stopped methods.
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Stopping target for the accuracy-stopped methods.
    pub target_forget_accuracy: f64,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod) -> Self {
        Self {
            method,
            epochs: 30,
            max_epochs: 100,
            learning_rate: 1e-3,
            weight_decay: 5e-4,
            batch_size: 64,
            target_forget_accuracy: CR_TARGET_FORGET_ACCURACY,
            seed: 0,
        }
    }

    /// Sets the stopping target for `scenario`: 1% for class removal, the
    /// original test accuracy otherwise.
    pub fn with_target(mut self, scenario: Scenario, original_test_accuracy: f64) -> Self {
        self.target_forget_accuracy = match scenario {
            Scenario::ClassRemoval => CR_TARGET_FORGET_ACCURACY,
            Scenario::HomogeneousRemoval => original_test_accuracy,
        };
        self
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.adam(),
            temperature: 1.0,
        }
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    fn expect(&self, method: BaselineMethod) -> Result<()> {
        if self.method != method {
            bail!(Config, "{} config passed to {}", self.method.as_str(), method.as_str());
        }
        if self.batch_size == 0 {
            bail!(Parameter, "batch size must be positive");
        }
        Ok(())
    }
}

/// A fresh model trained only on the retain-set.
pub fn retrain_oracle(arch: &Architecture, split: &SplitBundle, config: &BaselineConfig) -> Result<Model> {
    retrain_oracle_observed(arch, split, config, &mut |_| {})
}

/// [`retrain_oracle`] reporting each minibatch as retain-set row indices.
pub fn retrain_oracle_observed(
    arch: &Architecture,
    split: &SplitBundle,
    config: &BaselineConfig,
    observer: &mut dyn FnMut(&[usize]),
) -> Result<Model> {
    config.expect(BaselineMethod::Retrain)?;
    let fresh = Model::init(arch, config.seed)?;
    train_observed(fresh, &split.retain_train, &config.train_config(), config.seed, observer)
}

/// Continues training `model` on the retain-set only.
pub fn finetune(model: Model, split: &SplitBundle, config: &BaselineConfig) -> Result<Model> {
    finetune_observed(model, split, config, &mut |_| {})
}

/// [`finetune`] reporting each minibatch as retain-set row indices.
pub fn finetune_observed(
    model: Model,
    split: &SplitBundle,
    config: &BaselineConfig,
    observer: &mut dyn FnMut(&[usize]),
) -> Result<Model> {
    config.expect(BaselineMethod::Finetune)?;
    train_observed(model, &split.retain_train, &config.train_config(), config.seed, observer)
}

/// Result of an accuracy-stopped baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub model: Model,
    pub epochs_run: usize,
    pub final_forget_accuracy: f64,
    pub converged: bool,
    /// Set when gradient ascent blew past [`DIVERGENCE_LIMIT`].
    pub diverged: bool,
    /// Loss of every update, in order.
    pub loss_trace: Vec<f64>,
}

/// Gradient ascent on the forget-set cross-entropy.
pub fn negative_gradient(model: Model, split: &SplitBundle, config: &BaselineConfig) -> Result<BaselineOutcome> {
    config.expect(BaselineMethod::NegGrad)?;
    run_forget_descent(model, split, config, |labels, _| labels.to_vec(), -1.0)
}

/// Cross-entropy descent on the forget-set with every label replaced, once
/// per epoch, by a uniformly drawn different class.
pub fn random_label(model: Model, split: &SplitBundle, config: &BaselineConfig) -> Result<BaselineOutcome> {
    config.expect(BaselineMethod::RandLabel)?;
    let k = model.num_classes();
    if k < 2 {
        bail!(Parameter, "random labels need at least two classes");
    }
    let mut label_rng = rng::seeded(config.seed, stream::RANDOM_LABELS);
    run_forget_descent(
        model,
        split,
        config,
        move |labels, _| resample_labels(labels, k, &mut label_rng),
        1.0,
    )
}

/// Uniform draw from `{0..K−1} \ {y}` for every label `y`.
pub fn resample_labels<R: Rng + ?Sized>(labels: &[usize], num_classes: usize, rng: &mut R) -> Vec<usize> {
    labels
        .iter()
        .map(|&y| {
            let r = rng.random_range(0..num_classes - 1);
            if r >= y {
                r + 1
            } else {
                r
            }
        })
        .collect()
}

/// Epoch loop over forget batches shared by the accuracy-stopped baselines.
/// `relabel` produces the epoch's training labels from the true ones; `sign`
/// is −1 for ascent.
fn run_forget_descent(
    mut model: Model,
    split: &SplitBundle,
    config: &BaselineConfig,
    mut relabel: impl FnMut(&[usize], usize) -> Vec<usize>,
    sign: f64,
) -> Result<BaselineOutcome> {
    let forget = &split.forget_train;
    let mut a_f = accuracy(&model, forget)?;
    let mut outcome = BaselineOutcome {
        model: model.clone(),
        epochs_run: 0,
        final_forget_accuracy: a_f,
        converged: true,
        diverged: false,
        loss_trace: Vec::new(),
    };
    if a_f < config.target_forget_accuracy {
        return Ok(outcome);
    }
    let mut state = OptimizerState::new(&model, config.adam())?;
    let mut rng = rng::seeded(config.seed, stream::FORGET_SHUFFLE);
    let mut order: Vec<usize> = (0..forget.len()).collect();
    let mut epochs = 0;
    'epochs: while a_f >= config.target_forget_accuracy && epochs < config.max_epochs {
        let labels = relabel(forget.labels(), epochs);
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let inputs = forget.features().select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let spec = LossSpec::RetainCe {
                inputs: &inputs,
                labels: &y,
                temperature: 1.0,
            };
            let (loss, mut grads) = compute_gradients(&model, &spec)?;
            let loss = sign * loss;
            outcome.loss_trace.push(loss);
            if loss.abs() > DIVERGENCE_LIMIT || !loss.is_finite() {
                outcome.diverged = true;
                epochs += 1;
                break 'epochs;
            }
            grads.scale(sign);
            adam_step(&mut model, &grads, &mut state)?;
        }
        epochs += 1;
        a_f = accuracy(&model, forget)?;
    }
    outcome.converged = !outcome.diverged && a_f < config.target_forget_accuracy;
    outcome.epochs_run = epochs;
    outcome.final_forget_accuracy = accuracy(&model, forget)?;
    outcome.model = model;
    Ok(outcome)
}
