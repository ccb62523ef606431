//! Warm-started `λ_H` paths, one per `λ_K` value.

use rayon::prelude::*;
use serde::Serialize;

use super::{fit, lambda_max, lambda_path, CoordData, FitResult, PenaltyConfig, SolverConfig};
use crate::error::Result;
use crate::kernels::KernelBasis;

#[derive(Clone, Debug)]
pub struct PathPoint {
    pub lambda_h: f64,
    pub fit: FitResult,
}

#[derive(Clone, Debug)]
pub struct LambdaKPath {
    pub lambda_k: f64,
    /// Points in decreasing `λ_H` order. Shorter than the grid when the kill
    /// switch stopped the walk; the last point is then the one that tripped it.
    pub points: Vec<PathPoint>,
}

impl LambdaKPath {
    pub fn killed(&self) -> bool {
        self.points.last().is_some_and(|p| p.fit.killed)
    }
}

#[derive(Clone, Debug)]
pub struct PathResult {
    pub lambda_max: f64,
    pub lambda_h_grid: Vec<f64>,
    pub paths: Vec<LambdaKPath>,
}

/// One row of `path.json`.
#[derive(Clone, Debug, Serialize)]
pub struct PathSummary {
    pub lambda_k: f64,
    pub lambda_h: f64,
    pub active: Vec<usize>,
    pub active_count: usize,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub killed: bool,
}

impl PathResult {
    pub fn summaries(&self) -> Vec<PathSummary> {
        self.paths
            .iter()
            .flat_map(|p| {
                p.points.iter().map(move |pt| PathSummary {
                    lambda_k: p.lambda_k,
                    lambda_h: pt.lambda_h,
                    active: pt.fit.coefs.active_vec(),
                    active_count: pt.fit.coefs.active().len(),
                    objective: pt.fit.objective,
                    iterations: pt.fit.iterations,
                    converged: pt.fit.converged,
                    killed: pt.fit.killed,
                })
            })
            .collect()
    }
}

/// Walks the default log-spaced grid from `lambda_max` for every `λ_K`.
pub fn fit_path(
    data: &CoordData,
    basis: &KernelBasis,
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<PathResult> {
    cfg.validate()?;
    let lmax = lambda_max(data.x(), data.y(), weights);
    let grid = lambda_path(lmax, cfg.n_lambda_h, cfg.r_lambda);
    let mut result = fit_path_on_grid(data, basis, weights, cfg, &grid)?;
    result.lambda_max = lmax;
    Ok(result)
}

/// Walks a given decreasing `λ_H` grid for every `λ_K` in `cfg`. Each fit
/// starts from the previous point's solution; a walk ends at the first
/// fit whose active set exceeds the kill switch.
pub fn fit_path_on_grid(
    data: &CoordData,
    basis: &KernelBasis,
    weights: &[f64],
    cfg: &SolverConfig,
    lambda_h_grid: &[f64],
) -> Result<PathResult> {
    cfg.validate()?;
    let paths = cfg
        .lambda_k_grid
        .par_iter()
        .map(|&lambda_k| walk(data, basis, weights, cfg, lambda_k, lambda_h_grid, true))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathResult {
        lambda_max: lambda_h_grid.first().copied().unwrap_or(0.0),
        lambda_h_grid: lambda_h_grid.to_vec(),
        paths,
    })
}

pub(crate) fn walk(
    data: &CoordData,
    basis: &KernelBasis,
    weights: &[f64],
    cfg: &SolverConfig,
    lambda_k: f64,
    lambda_h_grid: &[f64],
    stop_on_kill: bool,
) -> Result<LambdaKPath> {
    let mut points: Vec<PathPoint> = Vec::with_capacity(lambda_h_grid.len());
    for &lambda_h in lambda_h_grid {
        let pen = PenaltyConfig {
            lambda_k,
            lambda_h,
            weights: weights.to_vec(),
        };
        let warm = points.last().map(|p| &p.fit.coefs);
        let fitted = fit(data, basis, &pen, cfg, warm)?;
        let killed = fitted.killed;
        points.push(PathPoint {
            lambda_h,
            fit: fitted,
        });
        if killed && stop_on_kill {
            break;
        }
    }
    Ok(LambdaKPath { lambda_k, points })
}
