//! Soft-margin kernel SVM trained by sequential minimal optimisation with
//! second-order working-set selection.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math;
use crate::tensor::Tensor;

/// Default KKT violation tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
/// Cap on pair updates per solve.
pub const MAX_PAIR_UPDATES: usize = 100_000;

const TAU: f64 = 1e-12;

/// `exp(−γ‖u − v‖²)`.
pub fn gaussian_kernel(u: &[f64], v: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        bail!(Parameter, "kernel gamma must be positive, got {}", gamma);
    }
    Ok(rbf(u, v, gamma))
}

#[inline]
pub(crate) fn rbf(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    math::exp(-gamma * d2)
}

/// Full Gram matrix of the rows of `x`, row-major.
pub fn kernel_matrix(x: &Tensor, gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        bail!(Parameter, "kernel gamma must be positive, got {}", gamma);
    }
    let n = x.rows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(x.row(i), x.row(j), gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Tensor,
    /// Dual variables of the support vectors, each in `(0, C]`.
    pub alphas: Vec<f64>,
    /// `±1` labels of the support vectors.
    pub sv_labels: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub iterations: usize,
    /// Maximal KKT violation `m(α) − M(α)` at exit.
    pub kkt_residual: f64,
    pub converged: bool,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut f = self.bias;
        for ((sv, &a), &y) in self.support_vectors.iter_rows().zip(&self.alphas).zip(&self.sv_labels) {
            f += a * y * rbf(sv, x, self.gamma);
        }
        f
    }

    /// 1 for the positive class, 0 otherwise.
    pub fn predict(&self, x: &[f64]) -> usize {
        usize::from(self.decision(x) > 0.0)
    }

    pub fn predict_all(&self, x: &Tensor) -> Vec<usize> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

/// Trains on rows of `x` with binary labels (1 = positive, 0 = negative).
pub fn train_svm(x: &Tensor, labels: &[usize], c: f64, gamma: f64, tolerance: f64) -> Result<SvmModel> {
    let n = x.rows();
    if labels.len() != n {
        bail!(Shape, "{} labels for {} rows", labels.len(), n);
    }
    let kernel = kernel_matrix(x, gamma)?;
    let all: Vec<usize> = (0..n).collect();
    train_on_subset(x, labels, &kernel, &all, c, gamma, tolerance)
}

/// Trains on the rows `subset` of `x`, reading kernel values from the full
/// precomputed Gram matrix `kernel`.
pub(crate) fn train_on_subset(
    x: &Tensor,
    labels: &[usize],
    kernel: &[f64],
    subset: &[usize],
    c: f64,
    gamma: f64,
    tolerance: f64,
) -> Result<SvmModel> {
    if !(c > 0.0) {
        bail!(Parameter, "C must be positive, got {}", c);
    }
    if !(tolerance > 0.0) {
        bail!(Parameter, "tolerance must be positive");
    }
    let full_n = x.rows();
    let y: Vec<f64> = subset
        .iter()
        .map(|&i| match labels[i] {
            0 => Ok(-1.0),
            1 => Ok(1.0),
            other => Err(crate::Error::Parameter(alloc::format!("label {} is not binary", other))),
        })
        .collect::<Result<_>>()?;
    if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        bail!(Parameter, "SVM training needs samples of both classes");
    }
    let n = subset.len();
    let k = |a: usize, b: usize| kernel[subset[a] * full_n + subset[b]];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut residual;
    loop {
        let (i, m_up, m_low) = select_first(&alpha, &grad, &y, c);
        residual = m_up - m_low;
        if residual < tolerance || iterations >= MAX_PAIR_UPDATES {
            break;
        }
        let Some(i) = i else { break };
        let Some(j) = select_second(i, m_up, &alpha, &grad, &y, c, &k) else {
            break;
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = k(i, j);
        let q_ij = y[i] * y[j] * kij;
        if y[i] != y[j] {
            let quad = positive(k(i, i) + k(j, j) + 2.0 * q_ij);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = positive(k(i, i) + k(j, j) - 2.0 * q_ij);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }

    let bias = -rho(&alpha, &grad, &y, c);
    let mut sv_rows = Vec::new();
    let mut alphas = Vec::new();
    let mut sv_labels = Vec::new();
    for (t, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            sv_rows.push(subset[t]);
            alphas.push(a);
            sv_labels.push(y[t]);
        }
    }
    Ok(SvmModel {
        support_vectors: x.select_rows(&sv_rows),
        alphas,
        sv_labels,
        bias,
        gamma,
        c,
        iterations,
        kkt_residual: residual,
        converged: residual < tolerance,
    })
}

fn positive(q: f64) -> f64 {
    if q > 0.0 {
        q
    } else {
        TAU
    }
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Maximal violating index in the up set, with `m(α)` and `M(α)`.
fn select_first(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> (Option<usize>, f64, f64) {
    let mut best = None;
    let mut m_up = f64::NEG_INFINITY;
    let mut m_low = f64::INFINITY;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && v > m_up {
            m_up = v;
            best = Some(t);
        }
        if in_low(alpha[t], y[t], c) && v < m_low {
            m_low = v;
        }
    }
    (best, m_up, m_low)
}

fn select_second(
    i: usize,
    m_up: f64,
    alpha: &[f64],
    grad: &[f64],
    y: &[f64],
    c: f64,
    k: &impl Fn(usize, usize) -> f64,
) -> Option<usize> {
    let mut best = None;
    let mut best_obj = f64::INFINITY;
    let kii = k(i, i);
    for t in 0..alpha.len() {
        if !in_low(alpha[t], y[t], c) {
            continue;
        }
        let b = m_up + y[t] * grad[t];
        if b <= 0.0 {
            continue;
        }
        let a = positive(kii + k(t, t) - 2.0 * k(i, t));
        let obj = -(b * b) / a;
        if obj < best_obj {
            best_obj = obj;
            best = Some(t);
        }
    }
    best
}

/// Offset `ρ` with `f(x) = Σ αᵢyᵢK(xᵢ, x) − ρ`.
fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let v = [0.2, 0.7];
        assert_eq!(gaussian_kernel(&v, &v, 3.0).unwrap(), 1.0);
        let k = gaussian_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((k - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!(gaussian_kernel(&[0.0], &[1.0], 1e4).unwrap() < 1e-300);
        assert!(gaussian_kernel(&v, &v, 0.0).is_err());
    }

    #[test]
    fn separable_pair() {
        let x = Tensor::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let m = train_svm(&x, &[0, 1], 1.0, 1.0, DEFAULT_TOLERANCE).unwrap();
        assert!(m.converged);
        assert_eq!(m.predict_all(&x), vec![0, 1]);
    }

    #[test]
    fn single_class_rejected() {
        let x = Tensor::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(train_svm(&x, &[1, 1], 1.0, 1.0, 1e-3).is_err());
        assert!(train_svm(&x, &[0, 1], 0.0, 1.0, 1e-3).is_err());
    }
}
