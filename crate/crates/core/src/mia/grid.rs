use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::metrics::accuracy_from_predictions;
use crate::mia::svm::{kernel_matrix, train_on_subset, DEFAULT_TOLERANCE};
use crate::tensor::Tensor;

/// Regularisation values searched, ascending.
pub const C_GRID: [f64; 4] = [1.0, 5.0, 10.0, 100.0];
/// Kernel widths searched, descending.
pub const GAMMA_GRID: [f64; 3] = [1.0, 0.1, 0.01];
pub const CV_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GridCandidate {
    pub c: f64,
    pub gamma: f64,
    /// Mean held-out accuracy over the folds.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best_c: f64,
    pub best_gamma: f64,
    pub candidates: Vec<GridCandidate>,
}

/// Stratified fold assignment: the rows of each class, in order, are dealt
/// round-robin over the folds.
pub fn stratified_folds(labels: &[usize], folds: usize) -> Vec<usize> {
    let mut next = [0usize; 2];
    labels
        .iter()
        .map(|&y| {
            let slot = &mut next[y.min(1)];
            let f = *slot % folds;
            *slot += 1;
            f
        })
        .collect()
}

/// 3-fold cross-validated grid search over [`C_GRID`] × [`GAMMA_GRID`] by
/// mean accuracy. Ties go to the smaller `C`, then the larger `γ`.
pub fn grid_search_cv(x: &Tensor, labels: &[usize]) -> Result<GridSearchResult> {
    grid_search_with(x, labels, &C_GRID, &GAMMA_GRID)
}

pub(crate) fn grid_search_with(
    x: &Tensor,
    labels: &[usize],
    c_grid: &[f64],
    gamma_grid: &[f64],
) -> Result<GridSearchResult> {
    let n = x.rows();
    if n < CV_FOLDS || labels.len() != n {
        bail!(Parameter, "cross-validation needs at least {} labelled rows", CV_FOLDS);
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives < 2 || n - positives < 2 {
        bail!(
            Parameter,
            "every training fold needs both classes; got {} positives of {}",
            positives,
            n
        );
    }
    let folds = stratified_folds(labels, CV_FOLDS);
    let split: Vec<(Vec<usize>, Vec<usize>)> = (0..CV_FOLDS)
        .map(|f| (0..n).partition(|&i| folds[i] != f))
        .collect();

    let mut scores = Vec::with_capacity(c_grid.len() * gamma_grid.len());
    for &gamma in gamma_grid {
        let kernel = kernel_matrix(x, gamma)?;
        for &c in c_grid {
            let mut total = 0.0;
            for (train, held) in &split {
                let model = train_on_subset(x, labels, &kernel, train, c, gamma, DEFAULT_TOLERANCE)?;
                let held_x = x.select_rows(held);
                let held_y: Vec<usize> = held.iter().map(|&i| labels[i]).collect();
                total += accuracy_from_predictions(&model.predict_all(&held_x), &held_y);
            }
            scores.push(GridCandidate {
                c,
                gamma,
                score: total / CV_FOLDS as f64,
            });
        }
    }
    // Candidate order for tie-breaking: C ascending, then γ descending.
    scores.sort_by(|a, b| {
        a.c.total_cmp(&b.c).then(b.gamma.total_cmp(&a.gamma))
    });
    let mut best = &scores[0];
    for cand in &scores[1..] {
        if cand.score > best.score {
            best = cand;
        }
    }
    Ok(GridSearchResult {
        best_c: best.c,
        best_gamma: best.gamma,
        candidates: scores.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified() {
        let labels = [1, 1, 1, 0, 0, 0, 1, 0, 1, 0, 1, 0];
        let f = stratified_folds(&labels, 3);
        for fold in 0..3 {
            let pos = (0..12).filter(|&i| f[i] == fold && labels[i] == 1).count();
            let neg = (0..12).filter(|&i| f[i] == fold && labels[i] == 0).count();
            assert_eq!((pos, neg), (2, 2));
        }
    }

    #[test]
    fn tiny_class_rejected() {
        let x = Tensor::from_rows(&[[0.0], [0.1], [0.2], [1.0]]).unwrap();
        assert!(grid_search_cv(&x, &[0, 0, 0, 1]).is_err());
    }

    #[test]
    fn full_tie_prefers_smallest_c_and_largest_gamma() {
        // Identical rows: every candidate predicts the same way on every fold.
        let x = Tensor::from_rows(&[[0.5, 0.5]; 6]).unwrap();
        let r = grid_search_cv(&x, &[0, 1, 0, 1, 0, 1]).unwrap();
        assert_eq!(r.candidates.len(), 12);
        assert!(r.candidates.iter().all(|c| c.score == r.candidates[0].score));
        assert_eq!((r.best_c, r.best_gamma), (1.0, 1.0));
    }
}
