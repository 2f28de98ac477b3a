//! Exact backpropagation for the three training objectives.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::nn::loss::{
    check_labels, mean_cosine_distance, mean_cosine_distance_grad, softmax_ce_grad,
    softmax_with_temperature, cross_entropy,
};
use crate::nn::model::Model;
use crate::tensor::Tensor;

/// One gradient tensor per model parameter, in [`Model::parameters`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    tensors: Vec<Tensor>,
}

impl GradientSet {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            tensors: model.parameters().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn new(tensors: Vec<Tensor>) -> Self {
        Self { tensors }
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    /// Gradients of the head weight and bias.
    pub fn head(&self) -> &[Tensor] {
        &self.tensors[self.tensors.len() - 2..]
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, other: &GradientSet, factor: f64) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            bail!(Shape, "gradient sets have different lengths");
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            if a.shape() != b.shape() {
                bail!(Shape, "gradient shapes {:?} and {:?} differ", a.shape(), b.shape());
            }
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += factor * y;
            }
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        crate::math::sqrt(self.tensors.iter().map(Tensor::squared_norm).sum())
    }

    pub(crate) fn check_congruent(&self, model: &Model) -> Result<()> {
        let n = model.parameters().count();
        if n != self.tensors.len() {
            bail!(Shape, "{} gradients for {} parameters", self.tensors.len(), n);
        }
        for (g, p) in self.tensors.iter().zip(model.parameters()) {
            if g.shape() != p.shape() {
                bail!(Shape, "gradient shape {:?} vs parameter {:?}", g.shape(), p.shape());
            }
        }
        Ok(())
    }
}

/// The objectives the engine can differentiate.
#[derive(Debug, Clone, Copy)]
pub enum LossSpec<'a> {
    /// Temperature-scaled softmax cross-entropy over the whole network.
    RetainCe {
        inputs: &'a Tensor,
        labels: &'a [usize],
        temperature: f64,
    },
    /// Mean cosine distance between backbone embeddings and fixed targets
    /// (one target row per input row).
    ForgetCosine {
        inputs: &'a Tensor,
        targets: &'a Tensor,
    },
    /// `λ_forget · ForgetCosine + λ_retain · RetainCe` on separate batches.
    Combined {
        forget_inputs: &'a Tensor,
        targets: &'a Tensor,
        retain_inputs: &'a Tensor,
        labels: &'a [usize],
        temperature: f64,
        lambda_forget: f64,
        lambda_retain: f64,
    },
}

/// Loss value without gradients.
pub fn evaluate_loss(model: &Model, spec: &LossSpec<'_>) -> Result<f64> {
    match *spec {
        LossSpec::RetainCe {
            inputs,
            labels,
            temperature,
        } => {
            let logits = model.logits(inputs)?;
            check_labels(logits.rows(), model.num_classes(), labels)?;
            cross_entropy(&softmax_with_temperature(&logits, temperature)?, labels)
        }
        LossSpec::ForgetCosine { inputs, targets } => {
            let emb = model.embed(inputs)?;
            mean_cosine_distance(&emb, targets)
        }
        LossSpec::Combined {
            forget_inputs,
            targets,
            retain_inputs,
            labels,
            temperature,
            lambda_forget,
            lambda_retain,
        } => {
            let mut total = 0.0;
            if lambda_forget != 0.0 {
                total += lambda_forget
                    * evaluate_loss(model, &LossSpec::ForgetCosine { inputs: forget_inputs, targets })?;
            }
            if lambda_retain != 0.0 {
                total += lambda_retain
                    * evaluate_loss(
                        model,
                        &LossSpec::RetainCe {
                            inputs: retain_inputs,
                            labels,
                            temperature,
                        },
                    )?;
            }
            Ok(total)
        }
    }
}

/// Loss value and exact gradient with respect to every parameter.
pub fn compute_gradients(model: &Model, spec: &LossSpec<'_>) -> Result<(f64, GradientSet)> {
    let mut grads = GradientSet::zeros_like(model);
    let loss = accumulate(model, spec, 1.0, &mut grads)?;
    Ok((loss, grads))
}

fn accumulate(model: &Model, spec: &LossSpec<'_>, weight: f64, grads: &mut GradientSet) -> Result<f64> {
    match *spec {
        LossSpec::RetainCe {
            inputs,
            labels,
            temperature,
        } => {
            if inputs.rows() == 0 {
                bail!(Parameter, "empty retain batch");
            }
            let cache = model.forward_cached(inputs)?;
            check_labels(cache.logits.rows(), model.num_classes(), labels)?;
            let (loss, mut d_logits) = softmax_ce_grad(&cache.logits, labels, temperature)?;
            scale_tensor(&mut d_logits, weight);
            backprop(model, &cache.acts, Some(&d_logits), None, grads)?;
            Ok(loss)
        }
        LossSpec::ForgetCosine { inputs, targets } => {
            if inputs.rows() == 0 {
                bail!(Parameter, "empty forget batch");
            }
            let cache = model.forward_cached(inputs)?;
            let emb = cache.embeddings();
            let loss = mean_cosine_distance(emb, targets)?;
            let mut d_emb = mean_cosine_distance_grad(emb, targets);
            scale_tensor(&mut d_emb, weight);
            backprop(model, &cache.acts, None, Some(d_emb), grads)?;
            Ok(loss)
        }
        LossSpec::Combined {
            forget_inputs,
            targets,
            retain_inputs,
            labels,
            temperature,
            lambda_forget,
            lambda_retain,
        } => {
            if !(lambda_forget >= 0.0 && lambda_retain >= 0.0) {
                bail!(Parameter, "loss weights must be non-negative");
            }
            let mut total = 0.0;
            if lambda_forget != 0.0 {
                let spec = LossSpec::ForgetCosine {
                    inputs: forget_inputs,
                    targets,
                };
                total += lambda_forget * accumulate(model, &spec, weight * lambda_forget, grads)?;
            }
            if lambda_retain != 0.0 {
                let spec = LossSpec::RetainCe {
                    inputs: retain_inputs,
                    labels,
                    temperature,
                };
                total += lambda_retain * accumulate(model, &spec, weight * lambda_retain, grads)?;
            }
            Ok(total)
        }
    }
}

fn scale_tensor(t: &mut Tensor, factor: f64) {
    if factor != 1.0 {
        for v in t.data_mut() {
            *v *= factor;
        }
    }
}

/// Propagates upstream gradients at the logits and/or the embedding back
/// through the network, accumulating into `grads`.
fn backprop(
    model: &Model,
    acts: &[Tensor],
    d_logits: Option<&Tensor>,
    d_embedding: Option<Tensor>,
    grads: &mut GradientSet,
) -> Result<()> {
    let n_back = model.backbone().len();
    let emb = acts.last().expect("non-empty");
    let mut d_act = d_embedding.unwrap_or_else(|| Tensor::zeros(emb.shape()));

    if let Some(d_logits) = d_logits {
        let head = model.head();
        let (gw, rest) = grads.tensors[2 * n_back..].split_at_mut(1);
        d_logits.add_t_matmul_into(emb, &mut gw[0])?;
        d_logits.add_col_sums_into(&mut rest[0]);
        let through = d_logits.matmul(head.weight())?;
        for (a, b) in d_act.data_mut().iter_mut().zip(through.data()) {
            *a += b;
        }
    }

    for (l, layer) in model.backbone().iter().enumerate().rev() {
        // Rectifier mask from the layer output; the subgradient at 0 is 0.
        let out = &acts[l + 1];
        for (d, &o) in d_act.data_mut().iter_mut().zip(out.data()) {
            if o <= 0.0 {
                *d = 0.0;
            }
        }
        let (gw, rest) = grads.tensors[2 * l..].split_at_mut(1);
        d_act.add_t_matmul_into(&acts[l], &mut gw[0])?;
        d_act.add_col_sums_into(&mut rest[0]);
        if l > 0 {
            d_act = d_act.matmul(layer.weight())?;
        }
    }
    Ok(())
}
