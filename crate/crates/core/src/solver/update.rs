//! The block update for one coefficient function, in eigenbasis coordinates.
//!
//! With the other predictors fixed, `β_i` minimizes
//! `½ Σ_j (1 + λ_K r_j) b_j² − ⟨c, b⟩ + B ‖b‖`, where `c` is the partial
//! target, `r_j = η_j²/θ_j` and `B = λ_H w_i`. The minimizer is zero when
//! `‖c‖ ≤ B`; otherwise `b_j = c_j / (a_j + B/s)` with `a_j = 1 + λ_K r_j` and
//! `s = ‖b‖` the unique positive root of `Σ_j c_j²/(a_j s + B)² = 1`.

use crate::error::{AfssenError, Result};

/// Tolerance on `|g(s) − 1|` for the norm equation.
pub const ROOT_TOLERANCE: f64 = 1e-12;
pub const ROOT_MAX_ITER: usize = 200;

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `g(s) = Σ_j c_j²/(a_j s + b)²` and its derivative.
fn g_and_slope(c: &[f64], scales: &[f64], b: f64, s: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut dg = 0.0;
    for (cj, aj) in c.iter().zip(scales) {
        let den = aj * s + b;
        let q = cj * cj / (den * den);
        g += q;
        dg -= 2.0 * aj * q / den;
    }
    (g, dg)
}

/// Solves `Σ_j c_j²/((1 + λ_K r_j) s + b)² = 1` for `s > 0`.
///
/// `g` is strictly decreasing on `(0, ‖c‖]` with `g(0) > 1 ≥ g(‖c‖)`, so the
/// root is bracketed there. Newton steps are taken when they stay inside the
/// current bracket, bisection otherwise.
pub fn solve_norm(c: &[f64], ratios: &[f64], lambda_k: f64, b: f64) -> Result<f64> {
    let norm = euclid(c);
    if !(norm > b) {
        return Err(AfssenError::RootContract { norm, threshold: b });
    }
    let scales: Vec<f64> = ratios.iter().map(|r| 1.0 + lambda_k * r).collect();
    if b == 0.0 {
        // s² = Σ c_j²/a_j² exactly
        return Ok(c
            .iter()
            .zip(&scales)
            .map(|(cj, aj)| (cj / aj).powi(2))
            .sum::<f64>()
            .sqrt());
    }

    let (mut lo, mut hi) = (0.0, norm);
    // the root is ‖c‖ − b when every a_j = 1, a good start in general
    let mut s = (norm - b) / scales.iter().cloned().fold(1.0, f64::max);
    let mut best = (f64::INFINITY, s);
    for _ in 0..ROOT_MAX_ITER {
        let (g, dg) = g_and_slope(c, &scales, b, s);
        let h = g - 1.0;
        if h.abs() < best.0 {
            best = (h.abs(), s);
        }
        if h.abs() <= ROOT_TOLERANCE {
            return Ok(s);
        }
        if h > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - h / dg;
        s = if newton > lo && newton < hi && dg < 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(best.1)
}

/// Closed-form minimizer of the single-predictor subproblem.
pub fn coordinate_update(c: &[f64], ratios: &[f64], lambda_k: f64, b: f64) -> Vec<f64> {
    if euclid(c) <= b {
        return vec![0.0; c.len()];
    }
    let s = solve_norm(c, ratios, lambda_k, b).expect("‖c‖ > b was checked");
    c.iter()
        .zip(ratios)
        .map(|(cj, r)| cj / (1.0 + lambda_k * r + b / s))
        .collect()
}
