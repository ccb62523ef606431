//! Matérn kernels, the Mercer eigensystem of the integral operator `K` on a
//! grid, Cameron–Martin norms and the diagonal action of `K⁻¹L²`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{AfssenError, Result};
use crate::fnspace::{inner_h, Grid, GridFunction};

/// Jitter added to the kernel diagonal, relative to the operator trace.
pub const JITTER: f64 = 1e-10;
/// Eigenvalues below this fraction of the leading one are dropped.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Negative eigenvalues larger than this fraction of the leading one mean the
/// kernel matrix is not positive semidefinite.
const NEGATIVE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    /// `exp(−|t−s|²/ρ)`, the ν = ∞ member.
    Gaussian,
    Matern52,
    Matern32,
    /// `exp(−|t−s|/ρ)`, ν = 1/2.
    Exponential,
    /// ν = 7/2. Only used to sample smooth coefficient functions.
    Matern72,
}

impl KernelFamily {
    /// The four families used as estimation kernels.
    pub const ESTIMATION: [KernelFamily; 4] = [
        KernelFamily::Gaussian,
        KernelFamily::Matern52,
        KernelFamily::Matern32,
        KernelFamily::Exponential,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Exponential => "exponential",
            KernelFamily::Matern72 => "matern72",
        }
    }

    /// Correlation at distance `d ≥ 0` for range `rho`.
    pub fn correlation(&self, d: f64, rho: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-d * d / rho).exp(),
            KernelFamily::Exponential => half_integer_matern(0, d, rho),
            KernelFamily::Matern32 => half_integer_matern(1, d, rho),
            KernelFamily::Matern52 => half_integer_matern(2, d, rho),
            KernelFamily::Matern72 => half_integer_matern(3, d, rho),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = AfssenError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "matern52" => Ok(KernelFamily::Matern52),
            "matern32" => Ok(KernelFamily::Matern32),
            "exponential" => Ok(KernelFamily::Exponential),
            "matern72" => Ok(KernelFamily::Matern72),
            other => Err(AfssenError::InvalidParameter(format!(
                "unknown kernel family '{other}'"
            ))),
        }
    }
}

/// Matérn correlation for `ν = p + 1/2`:
/// `exp(−x) · p!/(2p)! · Σ_{i=0}^{p} (p+i)!/(i!(p−i)!) · (2x)^{p−i}` with `x = √(2ν)·d/ρ`.
fn half_integer_matern(p: u32, d: f64, rho: f64) -> f64 {
    let nu = p as f64 + 0.5;
    let x = (2.0 * nu).sqrt() * d / rho;
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let poly: f64 = (0..=p)
        .map(|i| fact(p + i) / (fact(i) * fact(p - i)) * (2.0 * x).powi((p - i) as i32))
        .sum();
    (-x).exp() * poly * fact(p) / fact(2 * p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub rho: f64,
    #[serde(default = "unit")]
    pub sigma2: f64,
}

fn unit() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn new(family: KernelFamily, rho: f64) -> Result<Self> {
        KernelSpec::with_variance(family, rho, 1.0)
    }

    pub fn with_variance(family: KernelFamily, rho: f64, sigma2: f64) -> Result<Self> {
        let spec = KernelSpec {
            family,
            rho,
            sigma2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(AfssenError::InvalidParameter(format!(
                "kernel range must be positive, got {}",
                self.rho
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(AfssenError::InvalidParameter(format!(
                "kernel variance must be positive, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.sigma2 * self.family.correlation((t - s).abs(), self.rho)
    }

    /// `K(t_k, t_l)` on the grid points.
    pub fn matrix(&self, grid: Grid) -> DMatrix<f64> {
        let pts = grid.points();
        let m = pts.len();
        let mut k = DMatrix::zeros(m, m);
        for a in 0..m {
            k[(a, a)] = self.sigma2;
            for b in 0..a {
                let v = self.eval(pts[a], pts[b]);
                k[(a, b)] = v;
                k[(b, a)] = v;
            }
        }
        k
    }
}

pub fn kernel_eval(spec: &KernelSpec, t: f64, s: f64) -> f64 {
    spec.eval(t, s)
}

/// The operator `L`, assumed to share eigenfunctions with `K`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "etas", rename_all = "lowercase")]
pub enum LSpec {
    #[default]
    Identity,
    /// Eigenvalues `η_j` of `L`, at least as many as retained eigenfunctions.
    Custom(Vec<f64>),
}

/// Truncated Mercer eigensystem of `K` on a grid, with the eigenvalues of `L`.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    grid: Grid,
    spec: Option<KernelSpec>,
    thetas: Vec<f64>,
    /// `M × m`, row `j` holds `v_j` on the grid.
    eigenfuncs: DMatrix<f64>,
    etas: Vec<f64>,
    variance_fraction: f64,
    total_variance: f64,
}

impl KernelBasis {
    /// Assembles a basis from known eigenpairs and checks its invariants.
    pub fn from_parts(
        grid: Grid,
        thetas: Vec<f64>,
        eigenfuncs: DMatrix<f64>,
        etas: Vec<f64>,
    ) -> Result<Self> {
        let m_basis = thetas.len();
        if m_basis == 0 {
            return Err(AfssenError::InvalidParameter("empty basis".into()));
        }
        if eigenfuncs.nrows() != m_basis {
            return Err(AfssenError::Shape {
                what: "eigenfunction rows",
                expected: m_basis,
                found: eigenfuncs.nrows(),
            });
        }
        if eigenfuncs.ncols() != grid.m() {
            return Err(AfssenError::Shape {
                what: "eigenfunction columns",
                expected: grid.m(),
                found: eigenfuncs.ncols(),
            });
        }
        if etas.len() != m_basis {
            return Err(AfssenError::Shape {
                what: "eta sequence",
                expected: m_basis,
                found: etas.len(),
            });
        }
        if thetas.iter().any(|&t| !(t > 0.0)) || thetas.windows(2).any(|w| w[1] > w[0]) {
            return Err(AfssenError::InvalidParameter(
                "eigenvalues must be positive and nonincreasing".into(),
            ));
        }
        if etas.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
            return Err(AfssenError::InvalidParameter(
                "eta values must be finite and nonnegative".into(),
            ));
        }
        let gram = &eigenfuncs * eigenfuncs.transpose() * grid.weight();
        let err = (gram - DMatrix::<f64>::identity(m_basis, m_basis)).amax();
        if err > 1e-8 {
            return Err(AfssenError::InvalidParameter(format!(
                "eigenfunctions are not orthonormal (max Gram error {err:e})"
            )));
        }
        let total: f64 = thetas.iter().sum();
        Ok(KernelBasis {
            grid,
            spec: None,
            thetas,
            eigenfuncs,
            etas,
            variance_fraction: 1.0,
            total_variance: total,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn spec(&self) -> Option<&KernelSpec> {
        self.spec.as_ref()
    }

    /// Number of retained eigenfunctions `M`.
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.eigenfuncs
    }

    pub fn eigenfunction(&self, j: usize) -> GridFunction {
        GridFunction::new(self.grid, self.eigenfuncs.row(j).iter().copied().collect())
            .expect("eigenfunction values are finite")
    }

    /// Fraction of the total variance captured by the retained eigenvalues.
    pub fn variance_fraction(&self) -> f64 {
        self.variance_fraction
    }

    /// Sum of all eigenvalues before truncation.
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn export(&self) -> BasisExport {
        BasisExport {
            family: self.spec.map(|s| s.family.name().to_string()),
            rho: self.spec.map(|s| s.rho),
            m: self.grid.m(),
            basis_size: self.len(),
            thetas: self.thetas.clone(),
            etas: self.etas.clone(),
        }
    }
}

/// Debug export of a basis. Eigenfunction values go to a separate CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisExport {
    pub family: Option<String>,
    pub rho: Option<f64>,
    pub m: usize,
    #[serde(rename = "M")]
    pub basis_size: usize,
    pub thetas: Vec<f64>,
    pub etas: Vec<f64>,
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
pub(crate) fn sorted_eigen(mat: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = mat.nrows();
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        // fix the sign: largest-magnitude entry positive
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Eigendecomposes the quadrature-weighted kernel matrix and keeps the
/// smallest number of leading eigenpairs whose eigenvalues reach
/// `variance_target` of the total.
pub fn build_basis(
    spec: &KernelSpec,
    lspec: &LSpec,
    grid: Grid,
    variance_target: f64,
) -> Result<KernelBasis> {
    spec.validate()?;
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(AfssenError::InvalidParameter(format!(
            "variance target must lie in (0, 1], got {variance_target}"
        )));
    }
    let m = grid.m();
    let w = grid.weight();
    let mut kmat = spec.matrix(grid);
    let trace = w * kmat.diagonal().sum();
    for k in 0..m {
        kmat[(k, k)] += JITTER * trace;
    }
    let (values, vectors) = sorted_eigen(kmat * w);

    let theta1 = values[0];
    let smallest = values[m - 1];
    if !(theta1 > 0.0) || smallest < -NEGATIVE_TOLERANCE * theta1 {
        return Err(AfssenError::NotPositiveDefinite {
            min_eigenvalue: smallest,
        });
    }
    let total: f64 = values.iter().sum();
    let kept = values
        .iter()
        .take_while(|&&v| v > EIGEN_FLOOR * theta1)
        .count();

    let goal = variance_target * total;
    let mut cumulative = 0.0;
    let mut basis_size = kept;
    for (j, v) in values[..kept].iter().enumerate() {
        cumulative += v;
        if cumulative >= goal {
            basis_size = j + 1;
            break;
        }
    }
    let thetas: Vec<f64> = values[..basis_size].to_vec();
    let captured: f64 = thetas.iter().sum();

    // unit Euclidean eigenvectors become unit H-norm functions after scaling by 1/√w
    let scale = 1.0 / w.sqrt();
    let eigenfuncs = DMatrix::from_fn(basis_size, m, |j, k| vectors[(k, j)] * scale);

    let etas = match lspec {
        LSpec::Identity => vec![1.0; basis_size],
        LSpec::Custom(etas) => {
            if etas.len() < basis_size {
                return Err(AfssenError::Shape {
                    what: "custom eta sequence (at least M)",
                    expected: basis_size,
                    found: etas.len(),
                });
            }
            if etas.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
                return Err(AfssenError::InvalidParameter(
                    "eta values must be finite and nonnegative".into(),
                ));
            }
            etas[..basis_size].to_vec()
        }
    };

    Ok(KernelBasis {
        grid,
        spec: Some(*spec),
        thetas,
        eigenfuncs,
        etas,
        variance_fraction: captured / total,
        total_variance: total,
    })
}

/// `‖x‖_K = sqrt(Σ_j c_j²/θ_j)` for coordinates `c` in the basis.
pub fn norm_k(coefs: &[f64], basis: &KernelBasis) -> f64 {
    assert!(
        coefs.len() <= basis.len(),
        "coefficient sequence longer than the basis"
    );
    coefs
        .iter()
        .zip(&basis.thetas)
        .map(|(c, t)| c * c / t)
        .sum::<f64>()
        .sqrt()
}

/// Eigenvalues `η_j²/θ_j` of `K⁻¹L²` on `v_j`.
pub fn penalty_ratios(basis: &KernelBasis) -> Vec<f64> {
    basis
        .etas
        .iter()
        .zip(&basis.thetas)
        .map(|(e, t)| e * e / t)
        .collect()
}

/// Largest `|⟨v_i, v_j⟩_H − δ_ij|` over the retained eigenfunctions.
pub fn orthonormality_error(basis: &KernelBasis) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..basis.len() {
        let vi = basis.eigenfunction(i);
        for j in 0..=i {
            let ip = inner_h(&vi, &basis.eigenfunction(j)).expect("same grid");
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((ip - target).abs());
        }
    }
    worst
}
