//! Block coordinate descent for the AFSSEN objective.
//!
//! Everything runs in eigenbasis coordinates: a response `Y_n` is replaced by
//! its `M` coordinates and a coefficient function `β_i` by the row
//! `b_i = (⟨β_i, v_j⟩_H)_j` of a [`CoefSet`]. The smoothing penalty is then
//! diagonal with entries `η_j²/θ_j`.
//!
//! Predictor columns need not be standardized. With `d_i = N⁻¹ Σ_n x_ni²`
//! the block subproblem is rescaled by `1/d_i`, which leaves the closed-form
//! update of [`update`] unchanged and reduces to it exactly when `d_i = 1`.

pub mod adaptive;
pub mod kkt;
pub mod path;
pub mod update;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AfssenError, Result};
use crate::fnspace::project_rows;
use crate::kernels::{norm_k, penalty_ratios, KernelBasis};
use crate::simulate::Dataset;

pub use adaptive::{fit_afssen, AdaptiveResult, SelectedFit, WeightMode};
pub use kkt::{check_kkt, KktReport};
pub use path::{fit_path, fit_path_on_grid, LambdaKPath, PathPoint, PathResult, PathSummary};
pub use update::{coordinate_update, solve_norm};

/// Columns whose mean square falls below this are treated as constant zero.
const DEGENERATE_COLUMN: f64 = 1e-12;

/// Design and responses in eigenbasis coordinates.
#[derive(Clone, Debug)]
pub struct CoordData {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    col_scale: Vec<f64>,
}

impl CoordData {
    /// `x` is `N × I`, `y_coords` is `N × M`.
    pub fn new(x: DMatrix<f64>, y_coords: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y_coords.nrows() {
            return Err(AfssenError::Shape {
                what: "response coordinate rows",
                expected: x.nrows(),
                found: y_coords.nrows(),
            });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(AfssenError::InvalidParameter("empty design matrix".into()));
        }
        if x.iter().chain(y_coords.iter()).any(|v| !v.is_finite()) {
            return Err(AfssenError::InvalidParameter("non-finite data".into()));
        }
        let n = x.nrows() as f64;
        let col_scale = x.column_iter().map(|c| c.norm_squared() / n).collect();
        Ok(CoordData {
            x,
            y: y_coords,
            col_scale,
        })
    }

    pub fn from_dataset(data: &Dataset, basis: &KernelBasis) -> Result<Self> {
        CoordData::new(data.x.clone(), project_rows(&data.y, basis)?)
    }

    /// Restriction to the given observations, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        CoordData::new(self.x.select_rows(rows), self.y.select_rows(rows))
    }

    /// Restriction to the given predictors.
    pub fn restrict(&self, predictors: &[usize]) -> Result<Self> {
        CoordData::new(self.x.select_columns(predictors), self.y.clone())
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn predictors(&self) -> usize {
        self.x.ncols()
    }

    pub fn basis_len(&self) -> usize {
        self.y.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// `N⁻¹ Σ_n x_ni²` per predictor.
    pub fn col_scale(&self) -> &[f64] {
        &self.col_scale
    }

    fn check_basis(&self, basis: &KernelBasis) -> Result<()> {
        if self.basis_len() != basis.len() {
            return Err(AfssenError::Shape {
                what: "basis size",
                expected: basis.len(),
                found: self.basis_len(),
            });
        }
        Ok(())
    }
}

/// Coefficient functions in eigenbasis coordinates with their support.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefSet {
    coefs: DMatrix<f64>,
    active: BTreeSet<usize>,
}

impl CoefSet {
    pub fn zeros(predictors: usize, basis_len: usize) -> Self {
        CoefSet {
            coefs: DMatrix::zeros(predictors, basis_len),
            active: BTreeSet::new(),
        }
    }

    /// `I × M` coordinates; the support is read off the nonzero rows.
    pub fn from_matrix(coefs: DMatrix<f64>) -> Self {
        let active = (0..coefs.nrows())
            .filter(|&i| coefs.row(i).iter().any(|&v| v != 0.0))
            .collect();
        CoefSet { coefs, active }
    }

    /// Projects sampled coefficient functions (`I × m`) onto the basis.
    pub fn from_functions(values: &DMatrix<f64>, basis: &KernelBasis) -> Result<Self> {
        Ok(CoefSet::from_matrix(project_rows(values, basis)?))
    }

    pub fn predictors(&self) -> usize {
        self.coefs.nrows()
    }

    pub fn basis_len(&self) -> usize {
        self.coefs.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.coefs
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.coefs
    }

    pub fn active(&self) -> &BTreeSet<usize> {
        &self.active
    }

    pub fn active_vec(&self) -> Vec<usize> {
        self.active.iter().copied().collect()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.coefs.row(i).iter().copied().collect()
    }

    /// `‖β_i‖_H` on the span.
    pub fn norm_h(&self, i: usize) -> f64 {
        self.coefs.row(i).norm()
    }

    pub fn norm_k(&self, i: usize, basis: &KernelBasis) -> f64 {
        norm_k(&self.row(i), basis)
    }

    pub fn set_row(&mut self, i: usize, values: &[f64]) {
        self.coefs.row_mut(i).copy_from_slice(values);
        if values.iter().any(|&v| v != 0.0) {
            self.active.insert(i);
        } else {
            self.active.remove(&i);
        }
    }

    /// Fitted coordinates `X B` for every observation.
    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), self.basis_len());
        for &i in &self.active {
            out.ger(1.0, &x.column(i), &self.coefs.row(i).transpose(), 1.0);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda_k: f64,
    pub lambda_h: f64,
    /// Adaptive weights. `f64::INFINITY` excludes a predictor: it is held at zero.
    pub weights: Vec<f64>,
}

impl PenaltyConfig {
    pub fn unit(predictors: usize, lambda_k: f64, lambda_h: f64) -> Self {
        PenaltyConfig {
            lambda_k,
            lambda_h,
            weights: vec![1.0; predictors],
        }
    }

    pub fn validate(&self, predictors: usize) -> Result<()> {
        if !(self.lambda_k >= 0.0 && self.lambda_k.is_finite()) {
            return Err(AfssenError::InvalidParameter(format!(
                "lambda_k must be finite and nonnegative, got {}",
                self.lambda_k
            )));
        }
        if !(self.lambda_h >= 0.0 && self.lambda_h.is_finite()) {
            return Err(AfssenError::InvalidParameter(format!(
                "lambda_h must be finite and nonnegative, got {}",
                self.lambda_h
            )));
        }
        if self.weights.len() != predictors {
            return Err(AfssenError::Shape {
                what: "weights",
                expected: predictors,
                found: self.weights.len(),
            });
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(AfssenError::InvalidParameter(
                "weights must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn excluded(&self, i: usize) -> bool {
        self.weights[i].is_infinite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stop once the sweep increment `‖β⁽ᵗ⁾ − β⁽ᵗ⁻¹⁾‖_{H^I}` is at most this.
    pub threshold: f64,
    pub max_iter: usize,
    /// Cap on the active set; `None` means the number of predictors.
    pub kill_switch: Option<usize>,
    pub n_lambda_h: usize,
    pub r_lambda: f64,
    pub lambda_k_grid: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            threshold: 1e-3,
            max_iter: 1000,
            kill_switch: None,
            n_lambda_h: 100,
            r_lambda: 1e-6,
            lambda_k_grid: vec![10.0, 1.0, 0.01, 0.0001, 0.0],
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(AfssenError::InvalidParameter(
                "threshold must be positive".into(),
            ));
        }
        if !(self.r_lambda > 0.0 && self.r_lambda < 1.0) {
            return Err(AfssenError::InvalidParameter(
                "r_lambda must lie in (0, 1)".into(),
            ));
        }
        if self.n_lambda_h < 2 {
            return Err(AfssenError::InvalidParameter(
                "n_lambda_h must be at least 2".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(AfssenError::InvalidParameter(
                "max_iter must be positive".into(),
            ));
        }
        if self.lambda_k_grid.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(AfssenError::InvalidParameter(
                "lambda_k grid values must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn kill_limit(&self, predictors: usize) -> usize {
        self.kill_switch.unwrap_or(predictors)
    }
}

/// Residual coordinates `Y − X B`, maintained across coordinate updates.
#[derive(Clone, Debug)]
pub struct FitState {
    pub residual: DMatrix<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl FitState {
    pub fn new(data: &CoordData, coefs: &CoefSet) -> Self {
        FitState {
            residual: data.y() - coefs.predict(data.x()),
            objective_trace: Vec::new(),
            iterations: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub coefs: CoefSet,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub killed: bool,
    pub objective_trace: Vec<f64>,
}

fn objective_from_residual(
    residual: &DMatrix<f64>,
    coefs: &CoefSet,
    pen: &PenaltyConfig,
    ratios: &[f64],
) -> f64 {
    let n = residual.nrows() as f64;
    let fit = residual.norm_squared() / (2.0 * n);
    let mut smooth = 0.0;
    let mut sparse = 0.0;
    for &i in coefs.active() {
        let row = coefs.matrix().row(i);
        smooth += row.iter().zip(ratios).map(|(b, r)| b * b * r).sum::<f64>();
        sparse += pen.weights[i] * row.norm();
    }
    fit + 0.5 * pen.lambda_k * smooth + pen.lambda_h * sparse
}

/// The penalized criterion: data fit `(1/2N)Σ_n‖Y_n − X_n B‖²` on the span,
/// plus `(λ_K/2)Σ_i Σ_j b_ij² η_j²/θ_j`, plus `λ_H Σ_i w_i ‖b_i‖`.
pub fn objective(
    coefs: &CoefSet,
    data: &CoordData,
    pen: &PenaltyConfig,
    basis: &KernelBasis,
) -> Result<f64> {
    data.check_basis(basis)?;
    pen.validate(data.predictors())?;
    if coefs.predictors() != data.predictors() || coefs.basis_len() != basis.len() {
        return Err(AfssenError::Shape {
            what: "coefficient rows",
            expected: data.predictors(),
            found: coefs.predictors(),
        });
    }
    if let Some(&i) = coefs.active().iter().find(|&&i| pen.excluded(i)) {
        return Err(AfssenError::InvalidParameter(format!(
            "predictor {i} is excluded but has a nonzero coefficient"
        )));
    }
    let residual = data.y() - coefs.predict(data.x());
    Ok(objective_from_residual(
        &residual,
        coefs,
        pen,
        &penalty_ratios(basis),
    ))
}

/// `c_i = N⁻¹ X_iᵀ R / d_i + b_i`: the partial-residual target of predictor
/// `i`, with the current row of `i` added back.
pub fn partial_target(i: usize, state: &FitState, coefs: &CoefSet, data: &CoordData) -> Vec<f64> {
    let col = data.x().column(i);
    let scale = data.n() as f64 * data.col_scale()[i];
    let corr = state.residual.tr_mul(&col);
    corr.iter()
        .zip(coefs.matrix().row(i).iter())
        .map(|(c, b)| c / scale + b)
        .collect()
}

/// Smallest `λ_H` at which the all-zero fit is optimal:
/// `max_i ‖N⁻¹ X_iᵀ Y‖ / w_i` over non-excluded predictors.
pub fn lambda_max(x: &DMatrix<f64>, y_coords: &DMatrix<f64>, weights: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let corr = x.tr_mul(y_coords) / n;
    corr.row_iter()
        .zip(weights)
        .filter(|(_, w)| w.is_finite())
        .map(|(row, w)| row.norm() / w)
        .fold(0.0, f64::max)
}

/// `n` log-spaced values from `lmax` down to `r·lmax`. Empty, with a logged
/// warning, when `lmax ≤ 0`.
pub fn lambda_path(lmax: f64, n: usize, r: f64) -> Vec<f64> {
    if !(lmax > 0.0) {
        log::warn!("lambda_max is {lmax}; the lambda_H path is empty");
        return Vec::new();
    }
    assert!(n >= 2 && r > 0.0 && r < 1.0, "invalid path specification");
    let step = r.ln() / (n - 1) as f64;
    (0..n)
        .map(|k| {
            if k == 0 {
                lmax
            } else {
                lmax * (step * k as f64).exp()
            }
        })
        .collect()
}

/// Cyclic block coordinate descent from `warm` (or zero).
pub fn fit(
    data: &CoordData,
    basis: &KernelBasis,
    pen: &PenaltyConfig,
    cfg: &SolverConfig,
    warm: Option<&CoefSet>,
) -> Result<FitResult> {
    data.check_basis(basis)?;
    pen.validate(data.predictors())?;
    cfg.validate()?;
    let predictors = data.predictors();
    let mut coefs = match warm {
        Some(w) => {
            if w.predictors() != predictors || w.basis_len() != basis.len() {
                return Err(AfssenError::Shape {
                    what: "warm start rows",
                    expected: predictors,
                    found: w.predictors(),
                });
            }
            w.clone()
        }
        None => CoefSet::zeros(predictors, basis.len()),
    };
    let zero_row = vec![0.0; basis.len()];
    let skip: Vec<bool> = (0..predictors)
        .map(|i| pen.excluded(i) || data.col_scale()[i] < DEGENERATE_COLUMN)
        .collect();
    for i in 0..predictors {
        if skip[i] && coefs.active().contains(&i) {
            coefs.set_row(i, &zero_row);
        }
    }

    let ratios = penalty_ratios(basis);
    let kill = cfg.kill_limit(predictors);
    let mut state = FitState::new(data, &coefs);
    state
        .objective_trace
        .push(objective_from_residual(&state.residual, &coefs, pen, &ratios));

    let mut converged = false;
    let mut killed = false;
    while state.iterations < cfg.max_iter {
        state.iterations += 1;
        let mut increment = 0.0;
        for i in 0..predictors {
            if skip[i] {
                continue;
            }
            let c = partial_target(i, &state, &coefs, data);
            let d = data.col_scale()[i];
            let updated = coordinate_update(
                &c,
                &ratios,
                pen.lambda_k / d,
                pen.lambda_h * pen.weights[i] / d,
            );
            let delta = DVector::from_iterator(
                updated.len(),
                updated.iter().zip(coefs.matrix().row(i).iter()).map(|(u, o)| u - o),
            );
            let step = delta.norm_squared();
            if step > 0.0 {
                state.residual.ger(-1.0, &data.x().column(i), &delta, 1.0);
                coefs.set_row(i, &updated);
                increment += step;
            }
        }
        let obj = objective_from_residual(&state.residual, &coefs, pen, &ratios);
        if !obj.is_finite() {
            return Err(AfssenError::Divergence {
                iterations: state.iterations,
            });
        }
        state.objective_trace.push(obj);
        if coefs.active().len() > kill {
            killed = true;
            break;
        }
        if increment.sqrt() <= cfg.threshold {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        objective: *state.objective_trace.last().expect("trace is nonempty"),
        coefs,
        converged,
        iterations: state.iterations,
        killed,
        objective_trace: state.objective_trace,
    })
}
