use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math;
use crate::nn::grad::GradientSet;
use crate::nn::model::Model;
use crate::tensor::Tensor;

/// Adam hyperparameters with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            bail!(Parameter, "learning rate must be finite and >= 0, got {}", self.learning_rate);
        }
        if !(self.weight_decay >= 0.0) {
            bail!(Parameter, "weight decay must be >= 0, got {}", self.weight_decay);
        }
        if !open_unit(self.beta1) || !open_unit(self.beta2) {
            bail!(Parameter, "betas must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1e-3) {
            bail!(Parameter, "epsilon must lie in (0, 1e-3), got {}", self.epsilon);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(model: &Model, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        let zeros = || model.parameters().map(|p| Tensor::zeros(p.shape())).collect();
        Ok(Self {
            config,
            first_moment: zeros(),
            second_moment: zeros(),
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Tensor] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Tensor] {
        &self.second_moment
    }
}

/// One AdamW update: `θ ← θ − lr·wd·θ`, then the bias-corrected Adam step.
pub fn adam_step(model: &mut Model, grads: &GradientSet, state: &mut OptimizerState) -> Result<()> {
    grads.check_congruent(model)?;
    if state.first_moment.len() != grads.tensors().len() {
        bail!(Shape, "optimizer state does not track this model");
    }
    for (m, p) in state.first_moment.iter().zip(model.parameters()) {
        if m.shape() != p.shape() {
            bail!(Shape, "optimizer moment {:?} vs parameter {:?}", m.shape(), p.shape());
        }
    }

    state.step_count += 1;
    let AdamConfig {
        learning_rate: lr,
        weight_decay: wd,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
    } = state.config;
    let t = state.step_count as f64;
    let bias1 = 1.0 - libm::pow(b1, t);
    let bias2 = 1.0 - libm::pow(b2, t);
    let decay = 1.0 - lr * wd;

    let params = model.parameters_mut();
    let moments = state.first_moment.iter_mut().zip(state.second_moment.iter_mut());
    for ((p, g), (m, v)) in params.zip(grads.tensors()).zip(moments) {
        let iter = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((p, &g), (m, v)) in iter {
            *p *= decay;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (math::sqrt(v_hat) + eps);
        }
    }
    Ok(())
}
