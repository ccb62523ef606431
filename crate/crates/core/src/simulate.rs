//! Synthetic datasets: standardized Gaussian design, Matérn-process
//! coefficient functions on a sparse support, Gaussian or bounded
//! sub-Gaussian Matérn noise.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{AfssenError, Result};
use crate::fnspace::{Grid, GridFunction};
use crate::kernels::{sorted_eigen, KernelFamily, KernelSpec, JITTER};

/// Largest relative jitter tried before a Cholesky factorization is abandoned.
const MAX_JITTER: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Gaussian,
    /// Karhunen–Loève expansion with uniform `[−√3, √3]` scores.
    BoundedSubgaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub i: usize,
    pub i0: usize,
    pub grid: Grid,
    pub coef_kernel: KernelSpec,
    pub noise_kernel: KernelSpec,
    pub noise_mode: NoiseMode,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Rough setting: ν = 5/2 coefficients and ν = 3/2 noise, both with range 1/4.
    pub fn rough(seed: u64) -> Self {
        ScenarioSpec {
            n: 500,
            i: 1000,
            i0: 10,
            grid: Grid::new(50).expect("valid grid"),
            coef_kernel: KernelSpec {
                family: KernelFamily::Matern52,
                rho: 0.25,
                sigma2: 1.0,
            },
            noise_kernel: KernelSpec {
                family: KernelFamily::Matern32,
                rho: 0.25,
                sigma2: 1.0,
            },
            noise_mode: NoiseMode::Gaussian,
            seed,
        }
    }

    /// Smooth setting: ν = 7/2 coefficients with range 1, rough-setting noise.
    pub fn smooth(seed: u64) -> Self {
        ScenarioSpec {
            coef_kernel: KernelSpec {
                family: KernelFamily::Matern72,
                rho: 1.0,
                sigma2: 1.0,
            },
            ..ScenarioSpec::rough(seed)
        }
    }

    pub fn with_size(mut self, n: usize, i: usize, i0: usize) -> Self {
        self.n = n;
        self.i = i;
        self.i0 = i0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(AfssenError::InvalidParameter(format!(
                "need at least 2 observations, got {}",
                self.n
            )));
        }
        if self.i0 > self.i || self.i == 0 {
            return Err(AfssenError::InvalidParameter(format!(
                "need 0 ≤ I₀ ≤ I with I ≥ 1, got I₀ = {} and I = {}",
                self.i0, self.i
            )));
        }
        self.coef_kernel.validate()?;
        self.noise_kernel.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    /// `I × m`; rows outside the support are zero.
    pub beta_star: DMatrix<f64>,
    pub support: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub grid: Grid,
    /// `N × I`.
    pub x: DMatrix<f64>,
    /// `N × m`, one sampled response function per row.
    pub y: DMatrix<f64>,
    pub truth: Option<Truth>,
}

impl Dataset {
    pub fn new(grid: Grid, x: DMatrix<f64>, y: DMatrix<f64>, truth: Option<Truth>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(AfssenError::Shape {
                what: "response rows (must match design rows)",
                expected: x.nrows(),
                found: y.nrows(),
            });
        }
        if y.ncols() != grid.m() {
            return Err(AfssenError::Shape {
                what: "response columns",
                expected: grid.m(),
                found: y.ncols(),
            });
        }
        if let Some(t) = &truth {
            if t.beta_star.nrows() != x.ncols() || t.beta_star.ncols() != grid.m() {
                return Err(AfssenError::Shape {
                    what: "true coefficient rows",
                    expected: x.ncols(),
                    found: t.beta_star.nrows(),
                });
            }
        }
        Ok(Dataset { grid, x, y, truth })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn predictors(&self) -> usize {
        self.x.ncols()
    }

    pub fn response(&self, n: usize) -> GridFunction {
        GridFunction::new(self.grid, self.y.row(n).iter().copied().collect())
            .expect("responses are finite")
    }
}

/// Centers each column and rescales it to `Σ_n x_ni² = N`. Constant columns
/// are left at zero.
pub fn standardize_columns(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let ss = col.norm_squared();
        if ss > 0.0 {
            col *= (n / ss).sqrt();
        }
    }
}

/// Draws from a zero-mean Gaussian process through a Cholesky factor of the
/// jittered kernel matrix. Build once, sample many times.
#[derive(Clone, Debug)]
pub struct ProcessSampler {
    grid: Grid,
    factor: DMatrix<f64>,
}

impl ProcessSampler {
    pub fn new(spec: &KernelSpec, grid: Grid) -> Result<Self> {
        spec.validate()?;
        let kmat = spec.matrix(grid);
        let mut rel = JITTER;
        loop {
            let mut jittered = kmat.clone();
            for k in 0..grid.m() {
                jittered[(k, k)] += rel * spec.sigma2;
            }
            if let Some(chol) = Cholesky::new(jittered) {
                return Ok(ProcessSampler {
                    grid,
                    factor: chol.l(),
                });
            }
            rel *= 10.0;
            if rel > MAX_JITTER {
                return Err(AfssenError::CholeskyFailed {
                    jitter: rel / 10.0 * spec.sigma2,
                });
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GridFunction {
        let z = DVector::from_fn(self.grid.m(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let values = &self.factor * z;
        GridFunction::new(self.grid, values.iter().copied().collect())
            .expect("finite process sample")
    }
}

/// Karhunen–Loève sampler `Σ_j √γ_j ξ_j ψ_j` with `ξ_j` uniform on `[−√3, √3]`:
/// same covariance as the Gaussian process, bounded and sub-Gaussian scores.
#[derive(Clone, Debug)]
pub struct SubgaussianSampler {
    grid: Grid,
    /// `m × m`, column `j` holds `√γ_j ψ_j`.
    loadings: DMatrix<f64>,
}

impl SubgaussianSampler {
    pub fn new(spec: &KernelSpec, grid: Grid) -> Result<Self> {
        spec.validate()?;
        let (values, vectors) = sorted_eigen(spec.matrix(grid));
        if values[values.len() - 1] < -1e-8 * values[0] {
            return Err(AfssenError::NotPositiveDefinite {
                min_eigenvalue: values[values.len() - 1],
            });
        }
        let mut loadings = vectors;
        for (j, g) in values.iter().enumerate() {
            let s = g.max(0.0).sqrt();
            loadings.column_mut(j).scale_mut(s);
        }
        Ok(SubgaussianSampler { grid, loadings })
    }

    /// `√3 · Σ_j √γ_j |ψ_j(t_k)|`, the almost-sure bound on `|value at t_k|`.
    pub fn pointwise_bound(&self) -> Vec<f64> {
        self.loadings
            .row_iter()
            .map(|row| 3f64.sqrt() * row.iter().map(|v| v.abs()).sum::<f64>())
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GridFunction {
        let half = 3f64.sqrt();
        let dist = Uniform::new_inclusive(-half, half).expect("valid bounds");
        let xi = DVector::from_fn(self.grid.m(), |_, _| rng.sample(dist));
        let values = &self.loadings * xi;
        GridFunction::new(self.grid, values.iter().copied().collect())
            .expect("finite process sample")
    }
}

pub fn sample_process<R: Rng + ?Sized>(
    spec: &KernelSpec,
    grid: Grid,
    rng: &mut R,
) -> Result<GridFunction> {
    Ok(ProcessSampler::new(spec, grid)?.sample(rng))
}

pub fn sample_subgaussian<R: Rng + ?Sized>(
    spec: &KernelSpec,
    grid: Grid,
    rng: &mut R,
) -> Result<GridFunction> {
    Ok(SubgaussianSampler::new(spec, grid)?.sample(rng))
}

/// Draws a dataset from `Y_n = Σ_i X_ni β*_i + ε_n`.
///
/// The stream order is fixed: design entries row by row, then the `I₀`
/// coefficient functions, then the `N` noise functions.
pub fn generate(scenario: &ScenarioSpec) -> Result<Dataset> {
    scenario.validate()?;
    let ScenarioSpec { n, i, i0, grid, .. } = *scenario;
    let m = grid.m();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let mut x = DMatrix::zeros(n, i);
    for r in 0..n {
        for c in 0..i {
            x[(r, c)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    standardize_columns(&mut x);

    let mut beta_star = DMatrix::zeros(i, m);
    if i0 > 0 {
        let coef_sampler = ProcessSampler::new(&scenario.coef_kernel, grid)?;
        for row in 0..i0 {
            let f = coef_sampler.sample(&mut rng);
            beta_star.row_mut(row).copy_from_slice(f.values());
        }
    }

    let mut noise = DMatrix::zeros(n, m);
    match scenario.noise_mode {
        NoiseMode::Gaussian => {
            let s = ProcessSampler::new(&scenario.noise_kernel, grid)?;
            for r in 0..n {
                noise.row_mut(r).copy_from_slice(s.sample(&mut rng).values());
            }
        }
        NoiseMode::BoundedSubgaussian => {
            let s = SubgaussianSampler::new(&scenario.noise_kernel, grid)?;
            for r in 0..n {
                noise.row_mut(r).copy_from_slice(s.sample(&mut rng).values());
            }
        }
    }

    let y = if i0 > 0 {
        x.columns(0, i0) * beta_star.rows(0, i0) + noise
    } else {
        noise
    };
    Dataset::new(
        grid,
        x,
        y,
        Some(Truth {
            beta_star,
            support: (0..i0).collect(),
        }),
    )
}
