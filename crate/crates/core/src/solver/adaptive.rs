//! The two-stage procedure: a unit-weight stage selected by cross-validation,
//! then an adaptive stage weighted by the inverse norms of the stage-one fit.

use serde::{Deserialize, Serialize};

use super::path::walk;
use super::{CoefSet, CoordData, FitResult, SolverConfig};
use crate::error::{AfssenError, Result};
use crate::evalcv::{kfold, CVResult};
use crate::kernels::KernelBasis;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `w_i = 1/‖β̂_i‖_H` from the stage-one fit.
    #[default]
    NonadaptiveH,
    /// `w_i = 1/‖β̂_i‖_K` from the stage-one fit.
    NonadaptiveK,
    /// No adaptive step; stage two repeats stage one.
    Unit,
}

/// A cross-validated choice and the full-data fit at that grid point.
#[derive(Clone, Debug)]
pub struct SelectedFit {
    pub lambda_k: f64,
    pub lambda_h: f64,
    pub fit: FitResult,
    pub cv: CVResult,
}

#[derive(Clone, Debug)]
pub struct AdaptiveResult {
    pub stage1: SelectedFit,
    /// `None` when stage one selected the empty model.
    pub stage2: Option<SelectedFit>,
    /// Stage-two weights; `f64::INFINITY` marks an excluded predictor.
    pub weights: Vec<f64>,
    pub stage1_empty: bool,
}

impl AdaptiveResult {
    /// Stage two when it ran, stage one otherwise.
    pub fn selected(&self) -> &SelectedFit {
        self.stage2.as_ref().unwrap_or(&self.stage1)
    }
}

/// Cross-validates with the given weights, then refits the full data by
/// walking the same grid down to the chosen `λ_H` at the chosen `λ_K`.
pub fn select_and_refit(
    data: &CoordData,
    basis: &KernelBasis,
    weights: &[f64],
    cfg: &SolverConfig,
    folds: usize,
    seed: u64,
) -> Result<SelectedFit> {
    let cv = kfold(data, basis, weights, cfg, folds, seed)?;
    let best = cv.best.clone().ok_or_else(|| {
        AfssenError::Degenerate("no grid point has a finite cross-validation score".into())
    })?;
    // the refit must reach the chosen point, so the kill switch does not stop it
    let path = walk(
        data,
        basis,
        weights,
        cfg,
        best.lambda_k,
        &cv.lambda_h_grid[..=best.lambda_h_index],
        false,
    )?;
    let fit = path
        .points
        .into_iter()
        .last()
        .expect("grid prefix is nonempty")
        .fit;
    Ok(SelectedFit {
        lambda_k: best.lambda_k,
        lambda_h: best.lambda_h,
        fit,
        cv,
    })
}

/// Inverse norms of the stage-one fit; zero rows get infinite weight.
/// `None` for an empty stage-one model.
fn stage_two_weights(coefs: &CoefSet, basis: &KernelBasis, mode: WeightMode) -> Option<Vec<f64>> {
    if coefs.active().is_empty() {
        return None;
    }
    Some(
        (0..coefs.predictors())
            .map(|i| {
                let norm = match mode {
                    WeightMode::NonadaptiveK => coefs.norm_k(i, basis),
                    _ => coefs.norm_h(i),
                };
                if norm > 0.0 {
                    1.0 / norm
                } else {
                    f64::INFINITY
                }
            })
            .collect(),
    )
}

pub fn fit_afssen(
    data: &CoordData,
    basis: &KernelBasis,
    cfg: &SolverConfig,
    mode: WeightMode,
    folds: usize,
    seed: u64,
) -> Result<AdaptiveResult> {
    let p = data.predictors();
    let stage1 = select_and_refit(data, basis, &vec![1.0; p], cfg, folds, seed)?;
    if mode == WeightMode::Unit {
        return Ok(AdaptiveResult {
            stage2: Some(stage1.clone()),
            stage1,
            weights: vec![1.0; p],
            stage1_empty: false,
        });
    }
    let Some(weights) = stage_two_weights(&stage1.fit.coefs, basis, mode) else {
        return Ok(AdaptiveResult {
            stage1,
            stage2: None,
            weights: vec![1.0; p],
            stage1_empty: true,
        });
    };
    let stage2 = select_and_refit(data, basis, &weights, cfg, folds, seed)?;
    Ok(AdaptiveResult {
        stage1,
        stage2: Some(stage2),
        weights,
        stage1_empty: false,
    })
}
