//! Unlearning by centroid kinematics.
//!
//! Class centroids are computed once from the retain-set embeddings of the
//! original backbone. Each unlearning step then pulls every forget embedding
//! toward the nearest centroid (cosine distance) of a class other than its own
//! label, while a temperature-scaled cross-entropy on retain batches keeps the
//! rest of the network intact:
//!
//! ```text
//! L = λ_forget · mean(1 − cos(ψ(x_f), c*)) + λ_retain · CE(softmax(Φ(x_r) / T), y_r)
//! ```
//!
//! Epochs run until the forget-set accuracy drops below the scenario target
//! (1% for class removal, the original test accuracy for homogeneous
//! removal) or the epoch cap is reached.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{Dataset, Scenario, SplitBundle};
use crate::error::{bail, Result};
use crate::metrics::accuracy;
use crate::nn::{
    adam_step, compute_gradients, cosine_similarity, mean_cosine_distance, AdamConfig,
    GradientSet, LossSpec, Model, OptimizerState,
};
use crate::rng::{self, stream, ChaCha8Rng};
use crate::tensor::Tensor;

/// `1 − u·v / (‖u‖‖v‖)` with norms clamped at [`crate::nn::NORM_CLAMP`].
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    1.0 - cosine_similarity(u, v)
}

/// Per-class mean embeddings of the retain-set.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    vectors: Tensor,
    counts: Vec<usize>,
}

impl Centroids {
    pub fn vectors(&self) -> &Tensor {
        &self.vectors
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    /// A class is absent when it has no retain samples (a forgotten class).
    pub fn is_present(&self, class: usize) -> bool {
        self.counts[class] > 0
    }

    pub fn present_count(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn get(&self, class: usize) -> Option<&[f64]> {
        self.is_present(class).then(|| self.vectors.row(class))
    }
}

/// Mean backbone embedding of each class in `retain`. Classes listed in
/// `may_be_absent` are allowed to have no samples; any other empty class is a
/// data error.
pub fn compute_centroids(
    model: &Model,
    retain: &Dataset,
    num_classes: usize,
    may_be_absent: &[usize],
) -> Result<Centroids> {
    let emb = model.embed(retain.features())?;
    let dim = emb.cols();
    let mut sums = vec![0.0; num_classes * dim];
    let mut counts = vec![0usize; num_classes];
    for (row, &y) in emb.iter_rows().zip(retain.labels()) {
        if y >= num_classes {
            bail!(Parameter, "label {} outside [0, {})", y, num_classes);
        }
        counts[y] += 1;
        for (s, v) in sums[y * dim..(y + 1) * dim].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (k, &n) in counts.iter().enumerate() {
        if n == 0 {
            if !may_be_absent.contains(&k) {
                bail!(Data, "class {} has no retain samples", k);
            }
            continue;
        }
        for s in &mut sums[k * dim..(k + 1) * dim] {
            *s /= n as f64;
        }
    }
    Ok(Centroids {
        vectors: Tensor::new(vec![num_classes, dim], sums)?,
        counts,
    })
}

/// Present centroid of a class other than `true_label` at minimum cosine
/// distance from `embedding`; the lowest class index wins ties.
pub fn closest_centroid<'c>(
    embedding: &[f64],
    true_label: usize,
    centroids: &'c Centroids,
) -> Result<(usize, &'c [f64])> {
    if centroids.present_count() < 2 {
        bail!(Config, "closest-centroid matching needs at least two present centroids");
    }
    let mut best: Option<(usize, f64)> = None;
    for k in 0..centroids.num_classes() {
        if k == true_label || !centroids.is_present(k) {
            continue;
        }
        let d = cosine_distance(embedding, centroids.vectors.row(k));
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((k, d));
        }
    }
    match best {
        Some((k, _)) => Ok((k, centroids.vectors.row(k))),
        None => bail!(Config, "no present centroid differs from label {}", true_label),
    }
}

/// Matched centroid row for every embedding row.
pub fn match_centroids(embeddings: &Tensor, labels: &[usize], centroids: &Centroids) -> Result<Tensor> {
    let mut data = Vec::with_capacity(embeddings.len());
    for (e, &y) in embeddings.iter_rows().zip(labels) {
        data.extend_from_slice(closest_centroid(e, y, centroids)?.1);
    }
    Tensor::new(vec![embeddings.rows(), embeddings.cols()], data)
}

/// Mean cosine distance between embeddings and their matched centroids.
pub fn forget_loss(embeddings: &Tensor, matched: &Tensor) -> Result<f64> {
    mean_cosine_distance(embeddings, matched)
}

/// Temperature-scaled softmax cross-entropy of the full network.
pub fn retain_loss(model: &Model, inputs: &Tensor, labels: &[usize], temperature: f64) -> Result<f64> {
    crate::nn::evaluate_loss(
        model,
        &LossSpec::RetainCe {
            inputs,
            labels,
            temperature,
        },
    )
}

/// A forget batch and a retain batch for one update.
#[derive(Debug, Clone, Copy)]
pub struct BatchPair<'a> {
    pub forget_inputs: &'a Tensor,
    pub forget_labels: &'a [usize],
    pub retain_inputs: &'a Tensor,
    pub retain_labels: &'a [usize],
}

/// Components of the weighted objective.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedLoss {
    pub total: f64,
    /// Unweighted forget term (0 when its weight is 0).
    pub forget: f64,
    /// Unweighted retain term (0 when its weight is 0).
    pub retain: f64,
    pub gradients: GradientSet,
}

/// `λ_forget · L_forget + λ_retain · L_retain` and its gradient. Closest
/// centroids are matched under the model's current backbone. A term whose
/// weight is zero is not evaluated at all.
pub fn combined_loss(
    model: &Model,
    batches: &BatchPair<'_>,
    centroids: &Centroids,
    config: &UnlearnConfig,
) -> Result<CombinedLoss> {
    let mut gradients = GradientSet::zeros_like(model);
    let mut out = CombinedLoss {
        total: 0.0,
        forget: 0.0,
        retain: 0.0,
        gradients: GradientSet::new(Vec::new()),
    };
    if config.lambda_forget != 0.0 {
        let emb = model.embed(batches.forget_inputs)?;
        let targets = match_centroids(&emb, batches.forget_labels, centroids)?;
        let spec = LossSpec::ForgetCosine {
            inputs: batches.forget_inputs,
            targets: &targets,
        };
        let (loss, g) = compute_gradients(model, &spec)?;
        gradients.add_scaled(&g, config.lambda_forget)?;
        out.forget = loss;
        out.total += config.lambda_forget * loss;
    }
    if config.lambda_retain != 0.0 {
        let spec = LossSpec::RetainCe {
            inputs: batches.retain_inputs,
            labels: batches.retain_labels,
            temperature: config.temperature,
        };
        let (loss, g) = compute_gradients(model, &spec)?;
        gradients.add_scaled(&g, config.lambda_retain)?;
        out.retain = loss;
        out.total += config.lambda_retain * loss;
    }
    out.gradients = gradients;
    Ok(out)
}

/// Unlearning hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnlearnConfig {
    pub lambda_forget: f64,
    pub lambda_retain: f64,
    /// Retain batches processed per forget batch.
    pub batch_ratio: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub temperature: f64,
    /// Training stops once the forget accuracy falls strictly below this.
    pub target_forget_accuracy: f64,
    pub max_epochs: usize,
    pub scenario: Scenario,
}

/// Forget-accuracy target for class removal.
pub const CR_TARGET_FORGET_ACCURACY: f64 = 0.01;

impl UnlearnConfig {
    /// Class-removal defaults.
    pub fn class_removal() -> Self {
        Self {
            lambda_forget: 1.5,
            lambda_retain: 1.5,
            batch_ratio: 5,
            learning_rate: 1e-3,
            weight_decay: 5e-4,
            batch_size: 64,
            temperature: 2.0,
            target_forget_accuracy: CR_TARGET_FORGET_ACCURACY,
            max_epochs: 100,
            scenario: Scenario::ClassRemoval,
        }
    }

    /// Homogeneous-removal defaults; the target is the original model's test
    /// accuracy.
    pub fn homogeneous_removal(original_test_accuracy: f64) -> Self {
        Self {
            lambda_forget: 1.0,
            lambda_retain: 1.4,
            target_forget_accuracy: original_test_accuracy,
            scenario: Scenario::HomogeneousRemoval,
            ..Self::class_removal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_forget >= 0.0 && self.lambda_retain >= 0.0) {
            bail!(Parameter, "loss weights must be non-negative");
        }
        if self.lambda_forget + self.lambda_retain <= 0.0 {
            bail!(Parameter, "at least one loss weight must be positive");
        }
        if self.batch_ratio == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            bail!(Parameter, "batch ratio, batch size and max epochs must be positive");
        }
        if !(self.temperature > 0.0) {
            bail!(Parameter, "temperature must be positive");
        }
        if !(0.0..=1.0).contains(&self.target_forget_accuracy) {
            bail!(Parameter, "target forget accuracy must lie in [0, 1]");
        }
        self.adam().validate()
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlearnResult {
    pub model: Model,
    pub epochs_run: usize,
    pub final_forget_accuracy: f64,
    /// False when the epoch cap was reached before the target.
    pub converged: bool,
    /// Mean unweighted forget loss per epoch.
    pub forget_loss_trace: Vec<f64>,
    /// Mean unweighted retain loss per epoch.
    pub retain_loss_trace: Vec<f64>,
    pub steps: usize,
}

/// Endless stream of retain batches: a shuffled pass over the data, reshuffled
/// whenever fewer than a full batch remain.
pub(crate) struct RetainStream {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl RetainStream {
    pub(crate) fn new(len: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed, stream::RETAIN_STREAM);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        Self { order, pos: 0, rng }
    }

    pub(crate) fn next_batch(&mut self, size: usize) -> &[usize] {
        let size = size.min(self.order.len());
        if self.pos + size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let start = self.pos;
        self.pos += size;
        &self.order[start..self.pos]
    }
}

/// Runs centroid-kinematics unlearning on `model`.
pub fn unlearn_duck(
    model: Model,
    split: &SplitBundle,
    config: &UnlearnConfig,
    seed: u64,
) -> Result<UnlearnResult> {
    unlearn_duck_observed(model, split, config, seed, &mut |_, _| {})
}

/// [`unlearn_duck`], reporting the forget-set and retain-set row indices of
/// every update to `observer`.
pub fn unlearn_duck_observed(
    mut model: Model,
    split: &SplitBundle,
    config: &UnlearnConfig,
    seed: u64,
    observer: &mut dyn FnMut(&[usize], &[usize]),
) -> Result<UnlearnResult> {
    config.validate()?;
    if split.scenario != config.scenario {
        bail!(
            Config,
            "split is {} but the unlearning config targets {}",
            split.scenario.as_str(),
            config.scenario.as_str()
        );
    }
    let k = model.num_classes();
    let absent: &[usize] = match split.scenario {
        Scenario::ClassRemoval => &split.forget_classes,
        Scenario::HomogeneousRemoval => &[],
    };
    let forget = &split.forget_train;
    let retain = &split.retain_train;

    let mut a_f = accuracy(&model, forget)?;
    let mut result = UnlearnResult {
        model: model.clone(),
        epochs_run: 0,
        final_forget_accuracy: a_f,
        converged: true,
        forget_loss_trace: Vec::new(),
        retain_loss_trace: Vec::new(),
        steps: 0,
    };
    if a_f < config.target_forget_accuracy {
        return Ok(result);
    }

    let centroids = if config.lambda_forget != 0.0 {
        Some(compute_centroids(&model, retain, k, absent)?)
    } else {
        None
    };
    let mut state = OptimizerState::new(&model, config.adam())?;
    let mut forget_rng = rng::seeded(seed, stream::FORGET_SHUFFLE);
    let mut forget_order: Vec<usize> = (0..forget.len()).collect();
    let mut retain_stream = RetainStream::new(retain.len(), seed);
    let empty = Centroids {
        vectors: Tensor::zeros(&[0, 0]),
        counts: Vec::new(),
    };
    let centroids = centroids.as_ref().unwrap_or(&empty);

    let mut epochs = 0;
    while a_f >= config.target_forget_accuracy && epochs < config.max_epochs {
        forget_order.shuffle(&mut forget_rng);
        let (mut forget_sum, mut retain_sum, mut steps) = (0.0, 0.0, 0usize);
        for fb in forget_order.chunks(config.batch_size) {
            let forget_inputs = forget.features().select_rows(fb);
            let forget_labels: Vec<usize> = fb.iter().map(|&i| forget.labels()[i]).collect();
            for _ in 0..config.batch_ratio {
                let rb = retain_stream.next_batch(config.batch_size);
                observer(fb, rb);
                let retain_inputs = retain.features().select_rows(rb);
                let retain_labels: Vec<usize> = rb.iter().map(|&i| retain.labels()[i]).collect();
                let batches = BatchPair {
                    forget_inputs: &forget_inputs,
                    forget_labels: &forget_labels,
                    retain_inputs: &retain_inputs,
                    retain_labels: &retain_labels,
                };
                let loss = combined_loss(&model, &batches, centroids, config)?;
                adam_step(&mut model, &loss.gradients, &mut state)?;
                forget_sum += loss.forget;
                retain_sum += loss.retain;
                steps += 1;
            }
        }
        epochs += 1;
        result.steps += steps;
        result.forget_loss_trace.push(forget_sum / steps as f64);
        result.retain_loss_trace.push(retain_sum / steps as f64);
        a_f = accuracy(&model, forget)?;
    }

    result.converged = a_f < config.target_forget_accuracy;
    result.epochs_run = epochs;
    result.final_forget_accuracy = a_f;
    result.model = model;
    Ok(result)
}
