//! Discretized `L²[0,1]`: midpoint grids, quadrature inner products and
//! coordinates in an orthonormal basis.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AfssenError, Result};
use crate::kernels::KernelBasis;

/// Midpoint grid `t_k = (k − 0.5)/m` on `(0, 1)` with uniform weight `1/m`.
///
/// The grid is fully determined by `m`, so it is `Copy` and two grids are
/// compatible exactly when their sizes agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    m: usize,
}

impl Grid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(AfssenError::InvalidParameter(format!(
                "grid needs at least 2 points, got {m}"
            )));
        }
        Ok(Grid { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Zero-based: `point(0) = 0.5/m`.
    pub fn point(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.m as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|k| self.point(k)).collect()
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self.m != other.m {
            return Err(AfssenError::Shape {
                what: "grid size",
                expected: self.m,
                found: other.m,
            });
        }
        Ok(())
    }
}

/// A function in `H` represented by its values on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.m() {
            return Err(AfssenError::Shape {
                what: "grid function values",
                expected: grid.m(),
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(AfssenError::InvalidParameter(format!(
                "grid function value at index {k} is not finite"
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.m()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `a·self + b·other`, pointwise.
    pub fn axpby(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        GridFunction::new(self.grid, values)
    }
}

/// Quadrature inner product `weight · Σ_k f(t_k) g(t_k)`.
pub fn inner_h(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.grid.check_same(&g.grid)?;
    let dot: f64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
    Ok(f.grid.weight() * dot)
}

pub fn norm_h(f: &GridFunction) -> f64 {
    let ss: f64 = f.values.iter().map(|v| v * v).sum();
    (f.grid.weight() * ss).sqrt()
}

/// Coordinates `c_j = ⟨f, v_j⟩_H` of `f` in the basis eigenfunctions.
pub fn project(f: &GridFunction, basis: &KernelBasis) -> Result<Vec<f64>> {
    f.grid.check_same(&basis.grid())?;
    let w = f.grid.weight();
    let v = basis.eigenfunctions();
    Ok((0..basis.len())
        .map(|j| w * v.row(j).iter().zip(&f.values).map(|(a, b)| a * b).sum::<f64>())
        .collect())
}

/// `Σ_j c_j v_j` sampled on the basis grid. Shorter coefficient sequences are
/// padded with zeros.
pub fn reconstruct(coefs: &[f64], basis: &KernelBasis) -> Result<GridFunction> {
    if coefs.len() > basis.len() {
        return Err(AfssenError::Shape {
            what: "coefficient sequence (at most M)",
            expected: basis.len(),
            found: coefs.len(),
        });
    }
    let grid = basis.grid();
    let v = basis.eigenfunctions();
    let mut values = vec![0.0; grid.m()];
    for (j, &c) in coefs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (val, &vj) in values.iter_mut().zip(v.row(j).iter()) {
            *val += c * vj;
        }
    }
    GridFunction::new(grid, values)
}

/// Projects every row of an `n × m` matrix of sampled functions, giving `n × M`.
pub fn project_rows(values: &DMatrix<f64>, basis: &KernelBasis) -> Result<DMatrix<f64>> {
    if values.ncols() != basis.grid().m() {
        return Err(AfssenError::Shape {
            what: "columns of sampled functions",
            expected: basis.grid().m(),
            found: values.ncols(),
        });
    }
    Ok(values * basis.eigenfunctions().transpose() * basis.grid().weight())
}

/// Inverse of [`project_rows`] on the span: `n × M` coordinates to `n × m` values.
pub fn reconstruct_rows(coords: &DMatrix<f64>, basis: &KernelBasis) -> Result<DMatrix<f64>> {
    if coords.ncols() != basis.len() {
        return Err(AfssenError::Shape {
            what: "coordinate columns",
            expected: basis.len(),
            found: coords.ncols(),
        });
    }
    Ok(coords * basis.eigenfunctions())
}

/// Finite-difference derivative with step `1/m`: central differences inside,
/// second-order one-sided stencils at both ends. Exact on quadratics.
pub fn derivative(f: &GridFunction) -> Result<GridFunction> {
    let m = f.grid.m();
    if m < 3 {
        return Err(AfssenError::InvalidParameter(format!(
            "derivative needs at least 3 grid points, got {m}"
        )));
    }
    let inv_2h = m as f64 / 2.0;
    let v = &f.values;
    let mut d = vec![0.0; m];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv_2h;
    for k in 1..m - 1 {
        d[k] = (v[k + 1] - v[k - 1]) * inv_2h;
    }
    d[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) * inv_2h;
    GridFunction::new(f.grid, d)
}
