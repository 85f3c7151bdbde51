//! Lyapunov equations solved through their Kronecker (vectorized) form.
//!
//! With column-major `vec`, `vec(A P) = (I ⊗ A) vec(P)` and
//! `vec(P A') = (A ⊗ I) vec(P)`. The n² × n² systems are fine at desk scale.

use super::{eigenvalues, require_finite, require_square, symmetrize, Matrix};
use crate::error::{Error, Result};
use nalgebra::DVector;

/// Solves `A P + P A' + Q = 0`.
pub fn solve_lyap_continuous(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = check_pair(a, q)?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let ev = eigenvalues(a)?;
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let gap = ev
        .iter()
        .flat_map(|l| ev.iter().map(move |k| (l + k).norm()))
        .fold(f64::INFINITY, f64::min);
    if gap <= 1e-12 * scale {
        return Err(Error::SpectrumConflict(format!(
            "A and -A share an eigenvalue (min |l_i + l_j| = {gap:e})"
        )));
    }
    let id = Matrix::identity(n, n);
    let k = id.kronecker(a) + a.kronecker(&id);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SpectrumConflict("singular Kronecker operator".into()))?;
    Ok(symmetrize(&Matrix::from_column_slice(n, n, x.as_slice())))
}

/// Solves `P - A_d P A_d' - Q_d = 0` for Schur-stable `A_d`.
pub fn solve_lyap_discrete(ad: &Matrix, qd: &Matrix) -> Result<Matrix> {
    let n = check_pair(ad, qd)?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let rho = eigenvalues(ad)?.iter().map(|l| l.norm()).fold(0.0, f64::max);
    if rho >= 1.0 {
        return Err(Error::SpectrumConflict(format!("spectral radius {rho} >= 1")));
    }
    let k = Matrix::identity(n * n, n * n) - ad.kronecker(ad);
    let rhs = DVector::from_column_slice(qd.as_slice());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SpectrumConflict("singular Kronecker operator".into()))?;
    Ok(symmetrize(&Matrix::from_column_slice(n, n, x.as_slice())))
}

fn check_pair(a: &Matrix, q: &Matrix) -> Result<usize> {
    let n = require_square("A", a)?;
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::dims("Q", format!("expected {n}x{n}, got {}x{}", q.nrows(), q.ncols())));
    }
    require_finite("A", a)?;
    require_finite("Q", q)?;
    Ok(n)
}
