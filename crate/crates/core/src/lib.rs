//! Sparse function-on-scalar regression with the AFSSEN penalty.
//!
//! Responses are functions sampled on a regular grid of `[0, 1]`, predictors
//! are scalars, and every coefficient is a function. The estimator minimizes
//!
//! ```text
//! (1/2N) Σ_n ‖Y_n − Σ_i X_ni β_i‖²_H + (λ_K/2) Σ_i ‖L β_i‖²_K + λ_H Σ_i w_i ‖β_i‖_H
//! ```
//!
//! where `H = L²[0,1]` and `K` is the Cameron–Martin space of a Matérn kernel.
//! The H-norm term selects predictors and the squared K-norm term smooths them.
//! All numerics run in the truncated eigenbasis of the kernel operator, where
//! the smoothing penalty is diagonal.
//!
//! Module map:
//! - [`fnspace`]: grids, quadrature, projection onto an orthonormal basis.
//! - [`kernels`]: Matérn kernels and their Mercer eigensystem.
//! - [`simulate`]: synthetic datasets with Gaussian or bounded sub-Gaussian noise.
//! - [`solver`]: block coordinate descent, regularization paths, the adaptive two-stage fit.
//! - [`oracle`]: fixed-support closed-form estimate and design diagnostics.
//! - [`evalcv`]: k-fold cross-validation and evaluation metrics.
//! - [`experiment`]: replicated simulate → fit → score runs.
//! - [`io`]: CSV matrices and JSON artifacts.

pub mod error;
pub mod evalcv;
pub mod experiment;
pub mod fnspace;
pub mod io;
pub mod kernels;
pub mod oracle;
pub mod simulate;
pub mod solver;

pub use error::{AfssenError, Result};
pub use fnspace::{Grid, GridFunction};
pub use kernels::{KernelBasis, KernelFamily, KernelSpec, LSpec};
pub use simulate::{Dataset, NoiseMode, ScenarioSpec};
pub use solver::{CoefSet, CoordData, FitResult, PathResult, PenaltyConfig, SolverConfig};
