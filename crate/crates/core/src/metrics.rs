//! Split accuracies, the Adaptive Unlearning Score, and run aggregation.
//!
//! Accuracies are fractions in `[0, 1]` throughout; percentages only appear
//! at reporting boundaries.

use alloc::vec::Vec;

use crate::data::{Dataset, Scenario};
use crate::error::{bail, Result};
use crate::math;
use crate::nn::{predictions, Model};

/// Fraction of rows whose arg-max logit equals the label.
pub fn accuracy(model: &Model, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        bail!(Parameter, "accuracy of an empty dataset");
    }
    let logits = model.logits(dataset.features())?;
    Ok(accuracy_from_predictions(&predictions(&logits), dataset.labels()))
}

pub(crate) fn accuracy_from_predictions(pred: &[usize], labels: &[usize]) -> f64 {
    let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

/// Accuracies of an unlearned model on every partition, plus the original
/// model's reference test accuracy.
///
/// Class removal fills `a_t_r`/`a_t_f`; homogeneous removal fills `a_t`. The
/// reference `a_or_t` is the original model's retain-test accuracy in class
/// removal and its whole-test accuracy in homogeneous removal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AccuracyVector {
    pub a_r: f64,
    pub a_f: f64,
    pub a_t_r: Option<f64>,
    pub a_t_f: Option<f64>,
    pub a_t: Option<f64>,
    pub a_or_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AusScore {
    pub value: f64,
    pub delta: f64,
    pub scenario: Scenario,
}

/// `AUS = (1 − (A_or_t − A_t)) / (1 + Δ)` with `Δ = |A_f^t|` for class
/// removal and `Δ = |A_t − A_f|` for homogeneous removal.
pub fn aus(acc: &AccuracyVector, scenario: Scenario) -> Result<AusScore> {
    let (a_t, delta) = match scenario {
        Scenario::ClassRemoval => {
            let (Some(a_t), Some(a_f)) = (acc.a_t_r, acc.a_t_f) else {
                bail!(Parameter, "class-removal AUS needs retain-test and forget-test accuracies");
            };
            (a_t, (0.0 - a_f).abs())
        }
        Scenario::HomogeneousRemoval => {
            let Some(a_t) = acc.a_t else {
                bail!(Parameter, "homogeneous-removal AUS needs the test accuracy");
            };
            (a_t, (a_t - acc.a_f).abs())
        }
    };
    Ok(AusScore {
        value: (1.0 - (acc.a_or_t - a_t)) / (1.0 + delta),
        delta,
        scenario,
    })
}

/// Evaluates `model` on every partition of `split`. `original_reference` is
/// the original model's `a_or_t` (see [`AccuracyVector`]).
pub fn evaluate_split(
    model: &Model,
    split: &crate::data::SplitBundle,
    original_reference: f64,
) -> Result<AccuracyVector> {
    let opt = |d: &Option<Dataset>| d.as_ref().map(|d| accuracy(model, d)).transpose();
    let mut v = AccuracyVector {
        a_r: accuracy(model, &split.retain_train)?,
        a_f: accuracy(model, &split.forget_train)?,
        a_or_t: original_reference,
        ..AccuracyVector::default()
    };
    match split.scenario {
        Scenario::ClassRemoval => {
            v.a_t_r = opt(&split.retain_test)?;
            v.a_t_f = opt(&split.forget_test)?;
        }
        Scenario::HomogeneousRemoval => v.a_t = Some(accuracy(model, &split.test)?),
    }
    Ok(v)
}

/// The reference accuracy `a_or_t` for `split` under the original model.
pub fn reference_accuracy(original: &Model, split: &crate::data::SplitBundle) -> Result<f64> {
    match (split.scenario, &split.retain_test) {
        (Scenario::ClassRemoval, Some(rt)) => accuracy(original, rt),
        (Scenario::ClassRemoval, None) => bail!(Parameter, "class-removal split without retain-test"),
        (Scenario::HomogeneousRemoval, _) => accuracy(original, &split.test),
    }
}

/// Mean and sample standard deviation of one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// `None` for a single run.
    pub std: Option<f64>,
}

/// Arithmetic mean and `n − 1` standard deviation.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        bail!(Parameter, "cannot aggregate zero runs");
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        math::sqrt(ss / (n - 1.0))
    });
    Ok(Summary { mean, std })
}

/// Per-field summaries of a set of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAggregate {
    pub a_r: Summary,
    pub a_f: Summary,
    pub a_t_r: Option<Summary>,
    pub a_t_f: Option<Summary>,
    pub a_t: Option<Summary>,
    pub aus: Summary,
}

pub fn aggregate_runs(runs: &[(AccuracyVector, AusScore)]) -> Result<RunAggregate> {
    if runs.is_empty() {
        bail!(Parameter, "cannot aggregate zero runs");
    }
    let field = |f: &dyn Fn(&AccuracyVector) -> f64| -> Result<Summary> {
        summarize(&runs.iter().map(|(a, _)| f(a)).collect::<Vec<_>>())
    };
    let optional = |f: &dyn Fn(&AccuracyVector) -> Option<f64>| -> Result<Option<Summary>> {
        let vals: Option<Vec<f64>> = runs.iter().map(|(a, _)| f(a)).collect();
        vals.map(|v| summarize(&v)).transpose()
    };
    Ok(RunAggregate {
        a_r: field(&|a| a.a_r)?,
        a_f: field(&|a| a.a_f)?,
        a_t_r: optional(&|a| a.a_t_r)?,
        a_t_f: optional(&|a| a.a_t_f)?,
        a_t: optional(&|a| a.a_t)?,
        aus: summarize(&runs.iter().map(|(_, s)| s.value).collect::<Vec<_>>())?,
    })
}
