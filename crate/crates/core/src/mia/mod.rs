//! Membership inference attack.
//!
//! The attacker sees only the softmax output of the model. Forget-set rows
//! (training members) and test rows (non-members) are balanced, split 80/20,
//! and a Gaussian-kernel SVM tuned by 3-fold grid search tries to tell them
//! apart. An F1 of 0.5 on the held-out 20% is chance level.

mod grid;
mod svm;

pub use grid::{
    grid_search_cv, stratified_folds, GridCandidate, GridSearchResult, CV_FOLDS, C_GRID, GAMMA_GRID,
};
pub use svm::{
    gaussian_kernel, kernel_matrix, train_svm, SvmModel, DEFAULT_TOLERANCE, MAX_PAIR_UPDATES,
};

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{bail, Result};
use crate::nn::{softmax_row, Model};
use crate::rng::{self, stream};
use crate::tensor::Tensor;

/// Membership label of forget-set rows.
pub const MEMBER: usize = 1;
/// Membership label of test-set rows.
pub const NON_MEMBER: usize = 0;
/// Seeds of the attack runs.
pub const MIA_SEEDS: [u64; 3] = [0, 1, 2];
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiaSplit {
    Train,
    Test,
}

/// Softmax vectors with membership labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MiaDataset {
    pub features: Tensor,
    pub membership: Vec<usize>,
    pub split: MiaSplit,
}

impl MiaDataset {
    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    pub fn members(&self) -> usize {
        self.membership.iter().filter(|&&m| m == MEMBER).count()
    }
}

fn softmax_features(model: &Model, data: &Dataset) -> Result<Tensor> {
    let mut logits = model.logits(data.features())?;
    for r in 0..logits.rows() {
        softmax_row(logits.row_mut(r), 1.0);
    }
    Ok(logits)
}

/// Attack train/test sets from the model's softmax outputs on `forget`
/// (members) and `test` (non-members). The larger side is subsampled to the
/// smaller side's size, then each side is split 80/20 so both partitions stay
/// balanced.
pub fn build_mia_dataset(
    model: &Model,
    forget: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<(MiaDataset, MiaDataset)> {
    build_from_features(
        &softmax_features(model, forget)?,
        &softmax_features(model, test)?,
        seed,
    )
}

pub(crate) fn build_from_features(
    members: &Tensor,
    non_members: &Tensor,
    seed: u64,
) -> Result<(MiaDataset, MiaDataset)> {
    if members.rows() == 0 || non_members.rows() == 0 || members.is_empty() || non_members.is_empty() {
        bail!(Parameter, "membership inference needs non-empty member and non-member sets");
    }
    let mut rng = rng::seeded(seed, stream::MIA_SPLIT);
    let m = members.rows().min(non_members.rows());
    let n_train = libm::round(TRAIN_FRACTION * m as f64) as usize;

    let mut train_rows: Vec<(usize, usize)> = Vec::with_capacity(2 * n_train);
    let mut test_rows: Vec<(usize, usize)> = Vec::with_capacity(2 * (m - n_train));
    for (label, source) in [(MEMBER, members), (NON_MEMBER, non_members)] {
        // A uniformly random m-subset in random order.
        let mut picked = rand::seq::index::sample(&mut rng, source.rows(), m).into_vec();
        picked.shuffle(&mut rng);
        train_rows.extend(picked[..n_train].iter().map(|&i| (label, i)));
        test_rows.extend(picked[n_train..].iter().map(|&i| (label, i)));
    }
    train_rows.shuffle(&mut rng);
    test_rows.shuffle(&mut rng);

    let assemble = |rows: &[(usize, usize)], split| -> Result<MiaDataset> {
        let cols = members.cols();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &(label, i) in rows {
            let src = if label == MEMBER { members } else { non_members };
            data.extend_from_slice(src.row(i));
        }
        Ok(MiaDataset {
            features: Tensor::new(alloc::vec![rows.len(), cols], data)?,
            membership: rows.iter().map(|&(l, _)| l).collect(),
            split,
        })
    };
    Ok((assemble(&train_rows, MiaSplit::Train)?, assemble(&test_rows, MiaSplit::Test)?))
}

/// `2PR / (P + R)` for the positive class; 0 when `P + R = 0`.
pub fn f1_score(predictions: &[usize], labels: &[usize], positive: usize) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == positive, y == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fneg == 0 { 0.0 } else { tp as f64 / (tp + fneg) as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiaRun {
    pub seed: u64,
    pub c: f64,
    pub gamma: f64,
    pub f1: f64,
    /// False when the final SVM solve hit the update cap.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiaResult {
    pub mean_f1: f64,
    pub runs: Vec<MiaRun>,
}

impl MiaResult {
    pub fn per_run_f1(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.f1).collect()
    }
}

/// One attack: grid search on the train partition, refit with the chosen
/// hyperparameters, F1 on the test partition.
pub fn attack_once(train: &MiaDataset, test: &MiaDataset, seed: u64) -> Result<MiaRun> {
    let grid = grid_search_cv(&train.features, &train.membership)?;
    let svm = train_svm(
        &train.features,
        &train.membership,
        grid.best_c,
        grid.best_gamma,
        DEFAULT_TOLERANCE,
    )?;
    let pred = svm.predict_all(&test.features);
    Ok(MiaRun {
        seed,
        c: grid.best_c,
        gamma: grid.best_gamma,
        f1: f1_score(&pred, &test.membership, MEMBER),
        converged: svm.converged,
    })
}

/// Three attacks with seeds 0, 1, 2 and their mean F1.
pub fn run_mia(model: &Model, forget: &Dataset, test: &Dataset) -> Result<MiaResult> {
    let members = softmax_features(model, forget)?;
    let non_members = softmax_features(model, test)?;
    let runs = MIA_SEEDS
        .iter()
        .map(|&seed| {
            let (train, held) = build_from_features(&members, &non_members, seed)?;
            attack_once(&train, &held, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_f1 = runs.iter().map(|r| r.f1).sum::<f64>() / runs.len() as f64;
    Ok(MiaResult { mean_f1, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_cases() {
        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1], MEMBER), 1.0);
        assert_eq!(f1_score(&[0, 0, 0], &[1, 0, 1], MEMBER), 0.0);
        // TP=2, FP=1, FN=1
        let f = f1_score(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0], MEMBER);
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    fn probs(n: usize, offset: f64) -> Tensor {
        let rows: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let p = offset + 0.001 * i as f64;
                [p, 1.0 - p]
            })
            .collect();
        Tensor::from_rows(&rows).unwrap()
    }

    #[test]
    fn eighty_twenty_split() {
        let (tr, te) = build_from_features(&probs(100, 0.1), &probs(100, 0.5), 0).unwrap();
        assert_eq!((tr.len(), te.len()), (160, 40));
        assert_eq!((tr.members(), te.members()), (80, 20));
    }

    #[test]
    fn larger_side_is_subsampled() {
        let (tr, te) = build_from_features(&probs(50, 0.1), &probs(200, 0.3), 4).unwrap();
        assert_eq!(tr.len() + te.len(), 100);
        assert_eq!(tr.members() + te.members(), 50);
        assert_eq!((tr.len(), te.len()), (80, 20));
    }

    #[test]
    fn empty_side_rejected() {
        let empty = Tensor::zeros(&[0, 2]);
        assert!(build_from_features(&empty, &probs(3, 0.1), 0).is_err());
    }

    #[test]
    fn build_is_seeded() {
        let a = build_from_features(&probs(30, 0.1), &probs(40, 0.3), 9).unwrap();
        let b = build_from_features(&probs(30, 0.1), &probs(40, 0.3), 9).unwrap();
        let c = build_from_features(&probs(30, 0.1), &probs(40, 0.3), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
