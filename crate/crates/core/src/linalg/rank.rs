use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::svd::singular_values as jacobi_singular_values;
use super::{eigenvalues, require_square, sort_complex, symmetrize, Matrix, Tolerances};
use crate::error::{Error, Result};

/// Singular-value cutoff: `rank_rtol * sigma_max * max(rows, cols)`.
pub fn rank_cutoff(sigma_max: f64, rows: usize, cols: usize, tol: &Tolerances) -> f64 {
    tol.rank_rtol * sigma_max * rows.max(cols) as f64
}

/// Number of singular values above the relative cutoff. Works for real and
/// complex matrices.
pub fn numerical_rank<T>(m: &DMatrix<T>, tol: &Tolerances) -> usize
where
    T: ComplexField<RealField = f64>,
{
    if m.is_empty() {
        return 0;
    }
    let sv = sigma(m);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 || !smax.is_finite() {
        return 0;
    }
    let cut = rank_cutoff(smax, m.nrows(), m.ncols(), tol);
    sv.iter().filter(|&&s| s > cut).count()
}

/// 2-norm condition number; `inf` for singular or non-square input.
pub fn cond<T>(m: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    if m.nrows() != m.ncols() || m.is_empty() {
        return f64::INFINITY;
    }
    let sv = sigma(m);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

fn sigma<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Vec<f64> {
    jacobi_singular_values(m).unwrap_or_else(|_| m.singular_values().iter().copied().collect())
}

/// Full-column-rank `B` with `B B' = S` for symmetric PSD `S`.
///
/// Built from the symmetric eigendecomposition: eigenvalues at or below the
/// rank cutoff are discarded, columns are ordered by decreasing eigenvalue and
/// each column's largest-magnitude entry is made positive.
pub fn psd_factor(s: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let n = require_square("S", s)?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(s));
    let lmax = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    if lmax == 0.0 {
        return Ok(Matrix::zeros(n, 0));
    }
    if let Some(&worst) = eig.eigenvalues.iter().filter(|&&l| l < -tol.psd_tol * lmax).min_by(|a, b| a.total_cmp(b)) {
        return Err(Error::NotPsd(worst));
    }
    let cut = rank_cutoff(lmax, n, n, tol);
    let mut keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > cut).collect();
    keep.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut b = Matrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt();
        let pivot = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if pivot < 0.0 {
            col.neg_mut();
        }
        b.set_column(j, &col);
    }
    Ok(b)
}

/// Eigenvalues with modulus above `rank_rtol * n * ||M||_F`, sorted.
pub fn nonzero_spectrum(m: &Matrix, tol: &Tolerances) -> Result<Vec<Complex64>> {
    let n = require_square("M", m)?;
    let cut = tol.rank_rtol * n as f64 * m.norm();
    let mut ev: Vec<Complex64> = eigenvalues(m)?.into_iter().filter(|l| l.norm() > cut).collect();
    sort_complex(&mut ev);
    Ok(ev)
}
