//! First-order optimality check for a candidate solution.
//!
//! Active predictor `i` must satisfy `c_i = (a_j + B_i/s_i) b_ij` for every
//! coordinate `j`; an inactive one needs `‖N⁻¹ X_iᵀ R‖ ≤ λ_H w_i`.

use serde::Serialize;

use super::{partial_target, CoefSet, CoordData, FitState, PenaltyConfig};
use crate::error::Result;
use crate::kernels::{penalty_ratios, KernelBasis};

/// Violations measured at a fixed point. Active violations are relative to
/// `1 + ‖c_i‖`; inactive ones are the excess of the correlation norm over
/// the threshold.
#[derive(Clone, Debug, Default, Serialize)]
pub struct KktReport {
    pub max_active_violation: f64,
    pub max_inactive_excess: f64,
    pub active: usize,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_active_violation <= tol && self.max_inactive_excess <= tol
    }
}

pub fn check_kkt(
    data: &CoordData,
    basis: &KernelBasis,
    pen: &PenaltyConfig,
    coefs: &CoefSet,
) -> Result<KktReport> {
    super::objective(coefs, data, pen, basis)?;
    let ratios = penalty_ratios(basis);
    let state = FitState::new(data, coefs);
    let n = data.n() as f64;
    let mut report = KktReport {
        active: coefs.active().len(),
        ..KktReport::default()
    };
    for i in 0..data.predictors() {
        if pen.excluded(i) {
            continue;
        }
        let d = data.col_scale()[i];
        if coefs.active().contains(&i) {
            let c = partial_target(i, &state, coefs, data);
            let b = coefs.row(i);
            let s = coefs.norm_h(i);
            let lk = pen.lambda_k / d;
            let thr = pen.lambda_h * pen.weights[i] / d;
            let cnorm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let worst = c
                .iter()
                .zip(&b)
                .zip(&ratios)
                .map(|((cj, bj), r)| (cj - (1.0 + lk * r + thr / s) * bj).abs())
                .fold(0.0, f64::max);
            report.max_active_violation = report.max_active_violation.max(worst / (1.0 + cnorm));
        } else {
            let corr = state.residual.tr_mul(&data.x().column(i)).norm() / n;
            let excess = corr - pen.lambda_h * pen.weights[i];
            report.max_inactive_excess = report.max_inactive_excess.max(excess);
        }
    }
    Ok(report)
}
