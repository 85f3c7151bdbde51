use nalgebra::Schur;
use num_complex::Complex64;

use super::{require_finite, require_square, to_complex, CMatrix, Matrix, Tolerances};
use crate::error::{Error, Result};

/// Square roots are taken until the triangular factor is this close to I.
const SQRT_RADIUS: f64 = 0.25;
const QUADRATURE_POINTS: usize = 8;
const MAX_SQRTS: usize = 64;

/// Principal logarithm with default tolerances.
pub fn matrix_log_principal(m: &Matrix) -> Result<Matrix> {
    matrix_log_principal_tol(m, &Tolerances::default())
}

/// Principal matrix logarithm by inverse scaling and squaring on the complex
/// Schur form.
///
/// Fails with `SingularInput` when an eigenvalue is numerically zero and with
/// `ExistenceFailure` when one sits on the closed negative real axis.
pub fn matrix_log_principal_tol(m: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let n = require_square("M", m)?;
    require_finite("M", m)?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let scale = m.norm();
    let schur = Schur::try_new(to_complex(m), f64::EPSILON, 10_000).ok_or(Error::NoConvergence("complex Schur"))?;
    let (q, mut t) = schur.unpack();

    for i in 0..n {
        let d = t[(i, i)];
        if d.norm() <= tol.rank_rtol * scale {
            return Err(Error::SingularInput);
        }
        if d.re <= 0.0 && d.im.abs() <= tol.rank_rtol * d.norm().max(1.0) {
            return Err(Error::ExistenceFailure { re: d.re, im: d.im });
        }
    }

    let id = CMatrix::identity(n, n);
    let mut k = 0usize;
    while one_norm_c(&(&t - &id)) > SQRT_RADIUS {
        if k == MAX_SQRTS {
            return Err(Error::NoConvergence("inverse scaling and squaring"));
        }
        t = sqrt_upper_triangular(&t);
        k += 1;
    }

    let x = &t - &id;
    let (nodes, weights) = gauss_legendre_unit(QUADRATURE_POINTS);
    let mut l = CMatrix::zeros(n, n);
    for (&node, &w) in nodes.iter().zip(&weights) {
        // log(I + X) = integral_0^1 X (I + s X)^{-1} ds
        let denom = &id + &x * Complex64::new(node, 0.0);
        let solved = denom.lu().solve(&x).ok_or(Error::SingularInput)?;
        l += solved * Complex64::new(w, 0.0);
    }
    l *= Complex64::new(2f64.powi(k as i32), 0.0);

    let full = &q * l * q.adjoint();
    Ok(full.map(|z| z.re))
}

fn one_norm_c(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Principal square root of an upper triangular matrix (column recurrence).
fn sqrt_upper_triangular(t: &CMatrix) -> CMatrix {
    let n = t.nrows();
    let mut r = CMatrix::zeros(n, n);
    for j in 0..n {
        r[(j, j)] = t[(j, j)].sqrt();
        for i in (0..j).rev() {
            let mut s = t[(i, j)];
            for k in (i + 1)..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            r[(i, j)] = s / (r[(i, i)] + r[(j, j)]);
        }
    }
    r
}

/// Gauss-Legendre nodes and weights mapped to [0, 1].
fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
