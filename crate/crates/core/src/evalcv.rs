//! K-fold cross-validation over the `(λ_K, λ_H)` grid, and evaluation
//! metrics against a known truth.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AfssenError, Result};
use crate::fnspace::{derivative, reconstruct_rows, GridFunction};
use crate::kernels::KernelBasis;
use crate::solver::{fit_path_on_grid, lambda_max, lambda_path, CoefSet, CoordData, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvBest {
    pub lambda_k_index: usize,
    pub lambda_h_index: usize,
    pub lambda_k: f64,
    pub lambda_h: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CVResult {
    pub lambda_k_grid: Vec<f64>,
    pub lambda_h_grid: Vec<f64>,
    /// `[λ_K index][λ_H index]` mean held-out squared H-error per curve.
    /// Points killed or never reached in some fold are `+∞` (`null` in JSON).
    pub grid_scores: Vec<Vec<f64>>,
    pub best: Option<CvBest>,
    /// Zero-based fold label of every observation.
    pub fold_assignment: Vec<usize>,
    pub fold_sizes: Vec<usize>,
    pub seed: u64,
}

/// Random partition of `0..n` into `k` folds whose sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labels = vec![0; n];
    for (pos, &obs) in order.iter().enumerate() {
        labels[obs] = pos % k;
    }
    labels
}

/// Cross-validates the warm-started path on every fold.
///
/// All folds share one `λ_H` grid, anchored at the largest `lambda_max` among
/// the full data and every training split, so the first column is the
/// all-zero model in every fold.
pub fn kfold(
    data: &CoordData,
    basis: &KernelBasis,
    weights: &[f64],
    cfg: &SolverConfig,
    k: usize,
    seed: u64,
) -> Result<CVResult> {
    cfg.validate()?;
    let n = data.n();
    if k < 2 || k > n {
        return Err(AfssenError::InvalidParameter(format!(
            "fold count must lie in [2, N = {n}], got {k}"
        )));
    }
    let labels = fold_assignment(n, k, seed);
    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| labels[r] == f);
            (train, test)
        })
        .collect();

    let mut anchor = lambda_max(data.x(), data.y(), weights);
    let train_sets = folds
        .iter()
        .map(|(train, _)| data.subset(train))
        .collect::<Result<Vec<_>>>()?;
    for t in &train_sets {
        anchor = anchor.max(lambda_max(t.x(), t.y(), weights));
    }
    let grid = lambda_path(anchor, cfg.n_lambda_h, cfg.r_lambda);
    if grid.is_empty() {
        return Err(AfssenError::Degenerate(
            "lambda_max is zero: the responses are uncorrelated with every predictor".into(),
        ));
    }

    let n_k = cfg.lambda_k_grid.len();
    let per_fold = folds
        .par_iter()
        .zip(train_sets.par_iter())
        .map(|((_, test), train)| -> Result<Vec<Vec<f64>>> {
            let path = fit_path_on_grid(train, basis, weights, cfg, &grid)?;
            let x_test = data.x().select_rows(test);
            let y_test = data.y().select_rows(test);
            Ok(path
                .paths
                .iter()
                .map(|p| {
                    let mut row = vec![f64::INFINITY; grid.len()];
                    for (ih, pt) in p.points.iter().enumerate() {
                        if !pt.fit.killed {
                            row[ih] = (&y_test - pt.fit.coefs.predict(&x_test)).norm_squared();
                        }
                    }
                    row
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grid_scores = vec![vec![0.0; grid.len()]; n_k];
    for fold in &per_fold {
        for (ik, row) in fold.iter().enumerate() {
            for (ih, v) in row.iter().enumerate() {
                grid_scores[ik][ih] += v;
            }
        }
    }
    for row in &mut grid_scores {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }

    let mut best: Option<CvBest> = None;
    for (ik, row) in grid_scores.iter().enumerate() {
        for (ih, &score) in row.iter().enumerate() {
            if score.is_finite() && best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(CvBest {
                    lambda_k_index: ik,
                    lambda_h_index: ih,
                    lambda_k: cfg.lambda_k_grid[ik],
                    lambda_h: grid[ih],
                    score,
                });
            }
        }
    }

    Ok(CVResult {
        lambda_k_grid: cfg.lambda_k_grid.clone(),
        lambda_h_grid: grid,
        grid_scores,
        best,
        fold_sizes: (0..k).map(|f| labels.iter().filter(|&&l| l == f).count()).collect(),
        fold_assignment: labels,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub pred_error: f64,
    pub deriv_error: f64,
    pub tp: usize,
    pub fp: usize,
}

fn difference(coefs: &CoefSet, truth: &CoefSet, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if coefs.predictors() != truth.predictors() || coefs.predictors() != x.ncols() {
        return Err(AfssenError::Shape {
            what: "predictors in estimate, truth and design",
            expected: x.ncols(),
            found: coefs.predictors(),
        });
    }
    if coefs.basis_len() != truth.basis_len() {
        return Err(AfssenError::Shape {
            what: "basis size of truth",
            expected: coefs.basis_len(),
            found: truth.basis_len(),
        });
    }
    Ok(coefs.matrix() - truth.matrix())
}

/// `Σ_n ‖X_nᵀ β̂ − X_nᵀ β*‖_H`, computed in coordinates.
pub fn prediction_error(coefs: &CoefSet, truth: &CoefSet, x: &DMatrix<f64>) -> Result<f64> {
    let diff = difference(coefs, truth, x)?;
    let fitted = x * diff;
    Ok(fitted.row_iter().map(|r| r.norm()).sum())
}

/// `Σ_n ‖X_nᵀ β̂′ − X_nᵀ β*′‖_H` with finite-difference derivatives of the
/// reconstructed functions.
pub fn derivative_error(
    coefs: &CoefSet,
    truth: &CoefSet,
    x: &DMatrix<f64>,
    basis: &KernelBasis,
) -> Result<f64> {
    let diff = difference(coefs, truth, x)?;
    let grid = basis.grid();
    let values = reconstruct_rows(&diff, basis)?;
    let mut deriv = DMatrix::zeros(values.nrows(), values.ncols());
    for (i, row) in values.row_iter().enumerate() {
        if row.iter().all(|&v| v == 0.0) {
            continue;
        }
        let f = GridFunction::new(grid, row.iter().copied().collect())?;
        deriv.row_mut(i).copy_from_slice(derivative(&f)?.values());
    }
    let w = grid.weight();
    Ok((x * deriv).row_iter().map(|r| (w * r.norm_squared()).sqrt()).sum())
}

/// `(|active ∩ truth|, |active \ truth|)`.
pub fn support_metrics(coefs: &CoefSet, truth_support: &[usize]) -> (usize, usize) {
    let tp = coefs
        .active()
        .iter()
        .filter(|i| truth_support.contains(i))
        .count();
    (tp, coefs.active().len() - tp)
}

/// All four metrics; `truth` is `None` when no ground truth is known.
pub fn evaluate(
    coefs: &CoefSet,
    truth: Option<(&CoefSet, &[usize])>,
    x: &DMatrix<f64>,
    basis: &KernelBasis,
) -> Result<Metrics> {
    let (truth_coefs, support) = truth.ok_or(AfssenError::MissingTruth)?;
    let (tp, fp) = support_metrics(coefs, support);
    Ok(Metrics {
        pred_error: prediction_error(coefs, truth_coefs, x)?,
        deriv_error: derivative_error(coefs, truth_coefs, x, basis)?,
        tp,
        fp,
    })
}
