use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math;
use crate::tensor::{dot, Tensor};

/// Probabilities below this are clamped before taking the logarithm.
pub const LOG_CLAMP: f64 = 1e-12;
/// Vector norms below this are clamped in cosine computations.
pub const NORM_CLAMP: f64 = 1e-12;

/// Row-wise `softmax(logits / T)` with max subtraction.
pub fn softmax_with_temperature(logits: &Tensor, temperature: f64) -> Result<Tensor> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        bail!(Parameter, "temperature must be positive and finite, got {}", temperature);
    }
    let mut out = logits.clone();
    for r in 0..out.rows() {
        softmax_row(out.row_mut(r), temperature);
    }
    Ok(out)
}

pub(crate) fn softmax_row(row: &mut [f64], temperature: f64) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = math::exp((*v - max) / temperature);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Mean negative log-likelihood of the true labels.
pub fn cross_entropy(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let (n, k) = probs.matrix_dims()?;
    check_labels(n, k, labels)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -math::ln(probs.row(i)[y].max(LOG_CLAMP)))
        .sum();
    Ok(total / n as f64)
}

pub(crate) fn check_labels(rows: usize, classes: usize, labels: &[usize]) -> Result<()> {
    if rows == 0 {
        bail!(Parameter, "empty batch");
    }
    if labels.len() != rows {
        bail!(Shape, "{} labels for {} rows", labels.len(), rows);
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
        bail!(Parameter, "label {} outside [0, {})", y, classes);
    }
    Ok(())
}

pub(crate) fn clamped_norm(v: &[f64]) -> f64 {
    math::sqrt(dot(v, v)).max(NORM_CLAMP)
}

/// Cosine similarity with both norms clamped at [`NORM_CLAMP`].
pub(crate) fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    dot(u, v) / (clamped_norm(u) * clamped_norm(v))
}

/// Mean of `1 − cos(eᵢ, cᵢ)` over paired rows.
pub(crate) fn mean_cosine_distance(embeddings: &Tensor, targets: &Tensor) -> Result<f64> {
    if embeddings.shape() != targets.shape() {
        bail!(
            Shape,
            "embeddings {:?} and targets {:?} differ in shape",
            embeddings.shape(),
            targets.shape()
        );
    }
    let n = embeddings.rows();
    if n == 0 {
        bail!(Parameter, "empty batch");
    }
    let total: f64 = embeddings
        .iter_rows()
        .zip(targets.iter_rows())
        .map(|(e, c)| 1.0 - cosine_similarity(e, c))
        .sum();
    Ok(total / n as f64)
}

/// Gradient of `mean(1 − cos(eᵢ, cᵢ))` with respect to each `eᵢ`.
pub(crate) fn mean_cosine_distance_grad(embeddings: &Tensor, targets: &Tensor) -> Tensor {
    let n = embeddings.rows() as f64;
    let mut grad = Tensor::zeros(embeddings.shape());
    for (i, (e, c)) in embeddings.iter_rows().zip(targets.iter_rows()).enumerate() {
        let raw_norm = math::sqrt(dot(e, e));
        let ne = raw_norm.max(NORM_CLAMP);
        let nc = clamped_norm(c);
        let ec = dot(e, c);
        // A clamped norm is constant, so its derivative drops out.
        let radial = if raw_norm > NORM_CLAMP {
            ec / (ne * ne * ne * nc)
        } else {
            0.0
        };
        for ((g, &ej), &cj) in grad.row_mut(i).iter_mut().zip(e).zip(c) {
            *g = -(cj / (ne * nc) - radial * ej) / n;
        }
    }
    grad
}

/// Gradient of `cross_entropy(softmax(logits / T), labels)` with respect to
/// the logits, together with the loss value.
pub(crate) fn softmax_ce_grad(
    logits: &Tensor,
    labels: &[usize],
    temperature: f64,
) -> Result<(f64, Tensor)> {
    let probs = softmax_with_temperature(logits, temperature)?;
    let loss = cross_entropy(&probs, labels)?;
    let n = probs.rows() as f64;
    let mut grad = probs;
    for (i, &y) in labels.iter().enumerate() {
        let row = grad.row_mut(i);
        if row[y] < LOG_CLAMP {
            // Clamped term is constant in the logits.
            row.fill(0.0);
            continue;
        }
        row[y] -= 1.0;
        for g in row.iter_mut() {
            *g /= n * temperature;
        }
    }
    Ok((loss, grad))
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn predictions(logits: &Tensor) -> Vec<usize> {
    logits.iter_rows().map(argmax).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> Tensor {
        Tensor::from_rows(&[v]).unwrap()
    }

    #[test]
    fn uniform_logits_give_uniform_probs() {
        let p = softmax_with_temperature(&row(&[0.0, 0.0, 0.0]), 1.0).unwrap();
        for &v in p.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_temperature_flattens() {
        let p = softmax_with_temperature(&row(&[3.0, 5.0]), 1e6).unwrap();
        assert!((p.data()[0] - 0.5).abs() < 1e-5);
        assert!((p.data()[1] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn temperature_two_hand_value() {
        // exp(0.5) / (exp(0.5) + 1)
        let p = softmax_with_temperature(&row(&[1.0, 0.0]), 2.0).unwrap();
        assert!((p.data()[0] - 0.622_459_331_201_854_6).abs() < 1e-12);
        assert!((p.data()[1] - 0.377_540_668_798_145_4).abs() < 1e-12);
        assert!((p.data()[0] - 0.6225).abs() < 5e-5);
    }

    #[test]
    fn nonpositive_temperature_rejected() {
        assert!(softmax_with_temperature(&row(&[1.0]), 0.0).is_err());
        assert!(softmax_with_temperature(&row(&[1.0]), -1.0).is_err());
    }

    #[test]
    fn cross_entropy_cases() {
        let perfect = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(cross_entropy(&perfect, &[0, 1]).unwrap(), 0.0);

        let uniform = Tensor::from_rows(&[[0.25; 4]]).unwrap();
        assert!((cross_entropy(&uniform, &[2]).unwrap() - libm::log(4.0)).abs() < 1e-15);

        let p = row(&[0.6225, 0.3775]);
        assert!((cross_entropy(&p, &[0]).unwrap() - 0.4740).abs() < 1e-4);

        let exact = row(&[0.622_459_331_201_854_6, 0.377_540_668_798_145_4]);
        assert!((cross_entropy(&exact, &[0]).unwrap() - 0.4741).abs() < 5e-5);

        let zero = row(&[1.0, 0.0]);
        let clamped = cross_entropy(&zero, &[1]).unwrap();
        assert!((clamped - (-libm::log(1e-12))).abs() < 1e-9);
    }

    #[test]
    fn label_out_of_range() {
        let p = row(&[0.5, 0.5]);
        assert!(cross_entropy(&p, &[2]).is_err());
    }

    #[test]
    fn argmax_ties_pick_first() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
