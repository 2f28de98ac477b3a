#![allow(dead_code)]

use duck_core::nn::{evaluate_loss, Architecture, LossSpec, Model};
use duck_core::rng;
use duck_core::Tensor;
use rand::Rng;

pub fn random_tensor(rows: usize, cols: usize, seed: u64, lo: f64, hi: f64) -> Tensor {
    let mut r = rng::seeded(seed, 100);
    let data = (0..rows * cols).map(|_| r.random_range(lo..hi)).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

pub fn small_model(seed: u64) -> Model {
    let arch = Architecture {
        input_dim: 7,
        hidden: vec![12, 10],
        embedding_dim: 6,
        num_classes: 5,
    };
    Model::init(&arch, seed).unwrap()
}

/// Central-difference derivative of the loss with respect to every
/// parameter, in `Model::parameters` order.
pub fn numeric_gradient(model: &Model, spec: &LossSpec<'_>, h: f64) -> Vec<Vec<f64>> {
    let mut probe = model.clone();
    let sizes: Vec<usize> = model.parameters().map(|p| p.len()).collect();
    let mut out = Vec::with_capacity(sizes.len());
    for (t, &n) in sizes.iter().enumerate() {
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            let orig = *probe.parameter_value_mut(t, i);
            *probe.parameter_value_mut(t, i) = orig + h;
            let up = evaluate_loss(&probe, spec).unwrap();
            *probe.parameter_value_mut(t, i) = orig - h;
            let down = evaluate_loss(&probe, spec).unwrap();
            *probe.parameter_value_mut(t, i) = orig;
            g.push((up - down) / (2.0 * h));
        }
        out.push(g);
    }
    out
}

/// `|a − n| / max(|a|, |n|, floor)`; the floor keeps partials that are zero
/// up to rounding from dominating the ratio.
pub fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}
