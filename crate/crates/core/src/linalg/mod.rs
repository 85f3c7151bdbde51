//! Dense numerical kernels: matrix exponential and principal logarithm,
//! Lyapunov solvers, numerical rank and PSD factorization.
//!
//! Everything operates on `nalgebra::DMatrix`; complex arithmetic uses
//! `num_complex::Complex64`. All functions are pure.

mod expm;
mod logm;
mod lyapunov;
mod rank;
pub mod svd;

pub use expm::matrix_exp;
pub use logm::{matrix_log_principal, matrix_log_principal_tol};
pub use lyapunov::{solve_lyap_continuous, solve_lyap_discrete};
pub use rank::{cond, nonzero_spectrum, numerical_rank, psd_factor, rank_cutoff};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Numerical thresholds that stand in for exact-arithmetic conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Singular values below `rank_rtol * sigma_max * max(rows, cols)` count as zero.
    pub rank_rtol: f64,
    /// Eigenvalues down to `-psd_tol * max|lambda|` are accepted as nonnegative.
    pub psd_tol: f64,
    /// A pole is strictly stable when its real part is below `-stability_margin`.
    pub stability_margin: f64,
    /// Bound on relative equation residuals and on "identically zero" gains.
    pub residual_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_rtol: 1e-10,
            psd_tol: 1e-8,
            stability_margin: 1e-9,
            residual_tol: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn new(rank_rtol: f64, psd_tol: f64, stability_margin: f64, residual_tol: f64) -> Result<Self> {
        let t = Tolerances {
            rank_rtol,
            psd_tol,
            stability_margin,
            residual_tol,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_rtol", self.rank_rtol),
            ("psd_tol", self.psd_tol),
            ("stability_margin", self.stability_margin),
            ("residual_tol", self.residual_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn require_square(name: &'static str, m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare(name, m.nrows(), m.ncols()));
    }
    Ok(m.nrows())
}

pub(crate) fn require_finite(name: &'static str, m: &Matrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

pub fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Maximum absolute column sum.
pub fn norm_1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a real square matrix, sorted by (real, imaginary) part.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    let n = require_square("M", m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    require_finite("M", m)?;
    // Deflation at exactly machine epsilon can stall on matrices whose
    // subdiagonal is pure rounding noise (near-nilpotent or near-scalar);
    // retry with a shift and then with slightly looser thresholds.
    let sigma = m.norm().max(1.0);
    let attempts = [(0.0, 1.0), (sigma, 1.0), (0.0, 16.0), (sigma, 16.0), (0.0, 256.0)];
    let mut ev = None;
    for (shift, widen) in attempts {
        let shifted = m + Matrix::identity(n, n) * shift;
        if let Some(schur) = Schur::try_new(shifted, widen * f64::EPSILON, 10_000) {
            ev = Some(quasi_triangular_eigenvalues(&schur.unpack().1).into_iter().map(|l| l - shift).collect::<Vec<_>>());
            break;
        }
    }
    let mut ev = ev.ok_or(Error::NoConvergence("real Schur"))?;
    sort_complex(&mut ev);
    Ok(ev)
}

/// Eigenvalues of a real Schur form, reading each 2x2 diagonal block with a
/// complex square root so nearly repeated real pairs stay finite.
fn quasi_triangular_eigenvalues(t: &Matrix) -> Vec<Complex64> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mid = Complex64::new((a + d) / 2.0, 0.0);
            let half = (a - d) / 2.0;
            let root = Complex64::new(half * half + b * c, 0.0).sqrt();
            out.push(mid + root);
            out.push(mid - root);
            i += 2;
        } else {
            out.push(Complex64::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

/// Eigenvalues of a complex square matrix (diagonal of its Schur form).
pub fn complex_eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare("M", m.nrows(), m.ncols()));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(Error::NoConvergence("complex Schur"))?;
    let (_, t) = schur.unpack();
    let mut ev: Vec<Complex64> = t.diagonal().iter().copied().collect();
    sort_complex(&mut ev);
    Ok(ev)
}

pub(crate) fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Whether `m` has a full set of linearly independent eigenvectors.
///
/// Eigenvalues are clustered at `1e-6 * scale`; the geometric multiplicity of
/// each cluster is the nullity of `m - mu I` with singular values below
/// `1e-7 * scale` treated as zero. Rounding perturbs a defective eigenvalue by
/// roughly the square root of machine precision, which is what these bands
/// absorb.
pub fn is_diagonalizable(m: &Matrix) -> Result<bool> {
    let n = require_square("M", m)?;
    if n == 0 {
        return Ok(true);
    }
    let scale = m.norm().max(1.0);
    let ev = eigenvalues(m)?;
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for &l in &ev {
        match clusters.iter_mut().find(|(c, _)| (*c - l).norm() <= 1e-6 * scale) {
            Some(c) => c.1 += 1,
            None => clusters.push((l, 1)),
        }
    }
    let cm = to_complex(m);
    let mut total = 0usize;
    for (mu, _) in &clusters {
        let shifted = &cm - CMatrix::identity(n, n) * *mu;
        let sv = svd::singular_values(&shifted)?;
        total += sv.iter().filter(|&&s| s <= 1e-7 * scale).count();
    }
    Ok(total == n)
}
