mod common;

use common::{numeric_gradient, random_tensor, relative_error, small_model};
use duck_core::nn::{compute_gradients, GradientSet, LossSpec, Model};
use duck_core::Tensor;

const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-6;

fn max_rel_error(model: &Model, spec: &LossSpec<'_>) -> (f64, GradientSet) {
    let (_, analytic) = compute_gradients(model, spec).unwrap();
    let numeric = numeric_gradient(model, spec, STEP);
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.tensors().iter().zip(&numeric) {
        for (&a, &n) in a.data().iter().zip(n) {
            worst = worst.max(relative_error(a, n, FLOOR));
        }
    }
    (worst, analytic)
}

fn batch(seed: u64) -> (Tensor, Vec<usize>, Tensor, Tensor) {
    let x = random_tensor(9, 7, seed, 0.0, 1.0);
    let labels = (0..9).map(|i| (i * 3 + seed as usize) % 5).collect();
    let xf = random_tensor(6, 7, seed + 1, 0.0, 1.0);
    let targets = random_tensor(6, 6, seed + 2, 0.0, 1.0);
    (x, labels, xf, targets)
}

#[test]
fn retain_cross_entropy_matches_finite_differences() {
    for seed in 0..3 {
        let model = small_model(seed);
        let (x, y, _, _) = batch(seed);
        for t in [1.0, 2.0, 3.0] {
            let spec = LossSpec::RetainCe {
                inputs: &x,
                labels: &y,
                temperature: t,
            };
            let (err, _) = max_rel_error(&model, &spec);
            assert!(err < 1e-4, "seed {seed} T {t}: {err}");
        }
    }
}

#[test]
fn forget_cosine_matches_finite_differences() {
    for seed in 0..3 {
        let model = small_model(seed);
        let (_, _, xf, targets) = batch(seed);
        let spec = LossSpec::ForgetCosine {
            inputs: &xf,
            targets: &targets,
        };
        let (err, g) = max_rel_error(&model, &spec);
        assert!(err < 1e-4, "seed {seed}: {err}");
        for t in g.head() {
            assert!(t.data().iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn combined_matches_finite_differences() {
    for seed in 0..3 {
        let model = small_model(seed);
        let (x, y, xf, targets) = batch(seed);
        let spec = LossSpec::Combined {
            forget_inputs: &xf,
            targets: &targets,
            retain_inputs: &x,
            labels: &y,
            temperature: 2.0,
            lambda_forget: 1.5,
            lambda_retain: 1.5,
        };
        let (err, _) = max_rel_error(&model, &spec);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn combined_gradient_is_weighted_sum_of_parts() {
    let model = small_model(4);
    let (x, y, xf, targets) = batch(4);
    let (lf, gf) = compute_gradients(&model, &LossSpec::ForgetCosine { inputs: &xf, targets: &targets }).unwrap();
    let (lr, gr) = compute_gradients(
        &model,
        &LossSpec::RetainCe {
            inputs: &x,
            labels: &y,
            temperature: 2.0,
        },
    )
    .unwrap();
    let (l, g) = compute_gradients(
        &model,
        &LossSpec::Combined {
            forget_inputs: &xf,
            targets: &targets,
            retain_inputs: &x,
            labels: &y,
            temperature: 2.0,
            lambda_forget: 0.7,
            lambda_retain: 1.9,
        },
    )
    .unwrap();
    assert!((l - (0.7 * lf + 1.9 * lr)).abs() < 1e-12);
    for ((c, f), r) in g.tensors().iter().zip(gf.tensors()).zip(gr.tensors()) {
        for ((&c, &f), &r) in c.data().iter().zip(f.data()).zip(r.data()) {
            assert!((c - (0.7 * f + 1.9 * r)).abs() < 1e-12);
        }
    }
}

#[test]
fn forget_loss_at_its_minimum_has_no_gradient() {
    let model = small_model(5);
    let xf = random_tensor(4, 7, 9, 0.0, 1.0);
    let targets = model.embed(&xf).unwrap();
    if targets.iter_rows().any(|r| r.iter().all(|&v| v == 0.0)) {
        return;
    }
    let (loss, g) = compute_gradients(&model, &LossSpec::ForgetCosine { inputs: &xf, targets: &targets }).unwrap();
    assert!(loss.abs() < 1e-12);
    assert!(g.norm() < 1e-7, "{}", g.norm());
}

#[test]
fn empty_batches_are_rejected() {
    let model = small_model(0);
    let x = Tensor::zeros(&[0, 7]);
    let t = Tensor::zeros(&[0, 6]);
    assert!(compute_gradients(&model, &LossSpec::RetainCe { inputs: &x, labels: &[], temperature: 1.0 }).is_err());
    assert!(compute_gradients(&model, &LossSpec::ForgetCosine { inputs: &x, targets: &t }).is_err());
}
