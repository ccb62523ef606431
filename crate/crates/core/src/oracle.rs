//! Fixed-support estimation and design diagnostics.
//!
//! On a known support the `λ_H = 0` problem is linear:
//! `(Σ̂₁₁ ⊗ I + λ_K I ⊗ diag(η²/θ)) B = N⁻¹ X₁ᵀ Y`. Both operators are
//! diagonal in the tensor basis `u_i ⊗ v_j`, where `Σ̂₁₁ = U diag(τ) Uᵀ`, so
//! the solve is a rotation, a division by `τ_i + λ_K η_j²/θ_j` and a
//! rotation back.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AfssenError, Result};
use crate::kernels::{penalty_ratios, sorted_eigen, KernelBasis};
use crate::solver::{CoefSet, CoordData};

/// `Σ̂₁₁` eigenvalues below this make the oracle solve ill-conditioned.
pub const MIN_EIGENVALUE: f64 = 1e-10;

/// Closed-form fixed-support estimate. `x1` is `N × I₀`, `y_coords` is `N × M`;
/// returns the `I₀ × M` coordinates.
pub fn oracle_fit(
    x1: &DMatrix<f64>,
    y_coords: &DMatrix<f64>,
    basis: &KernelBasis,
    lambda_k: f64,
) -> Result<DMatrix<f64>> {
    if x1.nrows() != y_coords.nrows() {
        return Err(AfssenError::Shape {
            what: "response rows",
            expected: x1.nrows(),
            found: y_coords.nrows(),
        });
    }
    if y_coords.ncols() != basis.len() {
        return Err(AfssenError::Shape {
            what: "basis size",
            expected: basis.len(),
            found: y_coords.ncols(),
        });
    }
    let n = x1.nrows() as f64;
    let gram = x1.tr_mul(x1) / n;
    let (tau, u) = sorted_eigen(gram);
    let sigma_min = tau.last().copied().unwrap_or(0.0);
    if !(sigma_min >= MIN_EIGENVALUE) {
        return Err(AfssenError::IllConditioned { sigma_min });
    }
    let ratios = penalty_ratios(basis);
    let target = x1.tr_mul(y_coords) / n;
    let mut rotated = u.tr_mul(&target);
    for (i, t) in tau.iter().enumerate() {
        for (j, r) in ratios.iter().enumerate() {
            rotated[(i, j)] /= t + lambda_k * r;
        }
    }
    Ok(u * rotated)
}

/// [`oracle_fit`] on `support`, embedded as a full `I × M` coefficient set.
pub fn oracle_estimate(
    data: &CoordData,
    support: &[usize],
    basis: &KernelBasis,
    lambda_k: f64,
) -> Result<CoefSet> {
    let mut full = DMatrix::zeros(data.predictors(), basis.len());
    if !support.is_empty() {
        let restricted = oracle_fit(&data.x().select_columns(support), data.y(), basis, lambda_k)?;
        for (row, &i) in support.iter().enumerate() {
            full.row_mut(i).copy_from(&restricted.row(row));
        }
    }
    Ok(CoefSet::from_matrix(full))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleDistance {
    /// `‖β̂ − β̄‖_{H^I}`.
    pub h: f64,
    /// `‖β̂ − β̄‖_{K^I}`.
    pub k: f64,
    pub support_mismatch: bool,
}

pub fn oracle_distance(fit: &CoefSet, oracle: &CoefSet, basis: &KernelBasis) -> Result<OracleDistance> {
    if fit.predictors() != oracle.predictors() || fit.basis_len() != oracle.basis_len() {
        return Err(AfssenError::Shape {
            what: "coefficient rows",
            expected: oracle.predictors(),
            found: fit.predictors(),
        });
    }
    let diff = fit.matrix() - oracle.matrix();
    let thetas = basis.thetas();
    let mut h = 0.0;
    let mut k = 0.0;
    for row in diff.row_iter() {
        for (d, t) in row.iter().zip(thetas) {
            h += d * d;
            k += d * d / t;
        }
    }
    Ok(OracleDistance {
        h: h.sqrt(),
        k: k.sqrt(),
        support_mismatch: fit.active() != oracle.active(),
    })
}

/// Checkable premises of the support-recovery and oracle results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `max(σ_max, 1/σ_min)`.
    pub tau: f64,
    /// `‖Σ̂₂₁ Σ̂₁₁⁻¹‖_op`; `+∞` (`null` in JSON) when `Σ̂₁₁` is singular.
    pub phi: f64,
    pub irrepresentable_ok: bool,
    pub eigen_ok: bool,
    /// `min_{i∈S} ‖β*_i‖_H`, when the truth is known.
    pub b_n: Option<f64>,
    /// `max_{i∈S} ‖β*_i‖_K`, when the truth is known.
    pub d_n: Option<f64>,
    /// `min_j η_j²/√θ_j`: the largest constant `M` with `η_j² ≥ M √θ_j` for all `j`.
    pub eta_theta_min: f64,
    pub eta_theta_ok: bool,
}

/// Never fails on an assumption violation; violations are reported in the flags.
pub fn diagnose(
    x: &DMatrix<f64>,
    support: &[usize],
    beta_star: Option<&CoefSet>,
    basis: &KernelBasis,
) -> Result<Diagnostics> {
    if support.is_empty() {
        return Err(AfssenError::InvalidParameter(
            "diagnostics need a nonempty support".into(),
        ));
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= x.ncols()) {
        return Err(AfssenError::InvalidParameter(format!(
            "support index {bad} out of range for {} predictors",
            x.ncols()
        )));
    }
    let n = x.nrows() as f64;
    let null: Vec<usize> = (0..x.ncols()).filter(|i| !support.contains(i)).collect();
    let x1 = x.select_columns(support);
    let s11 = x1.tr_mul(&x1) / n;
    let (eig, _) = sorted_eigen(s11.clone());
    let sigma_max = eig[0];
    let sigma_min = eig[eig.len() - 1];

    let phi = if null.is_empty() {
        0.0
    } else if sigma_min <= MIN_EIGENVALUE * sigma_max.max(1.0) {
        f64::INFINITY
    } else {
        let x2 = x.select_columns(&null);
        let s21 = x2.tr_mul(&x1) / n;
        let s11_inv = s11
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(AfssenError::IllConditioned { sigma_min })?;
        (s21 * s11_inv).singular_values().max()
    };

    let (b_n, d_n) = match beta_star {
        Some(b) => (
            Some(support.iter().map(|&i| b.norm_h(i)).fold(f64::INFINITY, f64::min)),
            Some(support.iter().map(|&i| b.norm_k(i, basis)).fold(0.0, f64::max)),
        ),
        None => (None, None),
    };
    let eta_theta_min = basis
        .etas()
        .iter()
        .zip(basis.thetas())
        .map(|(e, t)| e * e / t.sqrt())
        .fold(f64::INFINITY, f64::min);

    Ok(Diagnostics {
        sigma_min,
        sigma_max,
        tau: if sigma_min > 0.0 {
            sigma_max.max(1.0 / sigma_min)
        } else {
            f64::INFINITY
        },
        phi,
        irrepresentable_ok: phi < 1.0,
        eigen_ok: sigma_min > 0.0,
        b_n,
        d_n,
        eta_theta_min,
        eta_theta_ok: eta_theta_min > 0.0,
    })
}
