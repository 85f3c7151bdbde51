//! One-sided (Hestenes) Jacobi SVD for real and complex matrices.
//!
//! Column pairs are rotated until mutually orthogonal; singular values are
//! then the column norms. Slow compared to bidiagonalization, but accurate
//! for the small, often rank-deficient matrices this crate decides ranks on.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(s) V^H` with `s` sorted in decreasing order.
/// `U` is `m x k`, `V` is `n x k`, `k = min(m, n)`. Columns of `U` belonging
/// to zero singular values are zero.
#[derive(Debug, Clone)]
pub struct Svd<T: ComplexField<RealField = f64>> {
    pub u: DMatrix<T>,
    pub s: Vec<f64>,
    pub v: DMatrix<T>,
}

pub fn svd<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<Svd<T>> {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.adjoint())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    let mut w = a.clone();
    let mut v = DMatrix::<T>::identity(n, n);
    let eps = f64::EPSILON;
    // columns this small carry no information above rounding
    let negligible = (eps * a.norm()).powi(2);
    // inner products carry rounding of order m eps, so demanding more stalls
    let tol = eps * m as f64;

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.clone().modulus();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                // remove the phase of gamma from column q, then a real rotation
                let phase = gamma.unscale(g).conjugate();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, phase.clone(), c, s);
                rotate(&mut v, p, q, phase, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence("Jacobi SVD"));
    }

    let mut order: Vec<(usize, f64)> = (0..n).map(|j| (j, w.column(j).norm())).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut u = DMatrix::<T>::zeros(m, n);
    let mut vs = DMatrix::<T>::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &(j, sigma)) in order.iter().enumerate() {
        if sigma > 0.0 {
            u.set_column(k, &w.column(j).unscale(sigma));
        }
        vs.set_column(k, &v.column(j));
        s.push(sigma);
    }
    Ok(Svd { u, s, v: vs })
}

fn rotate<T: ComplexField<RealField = f64>>(x: &mut DMatrix<T>, p: usize, q: usize, phase: T, c: f64, s: f64) {
    for i in 0..x.nrows() {
        let xp = x[(i, p)].clone();
        let xq = x[(i, q)].clone() * phase.clone();
        x[(i, p)] = xp.clone().scale(c) - xq.clone().scale(s);
        x[(i, q)] = xp.scale(s) + xq.scale(c);
    }
}

/// Singular values in decreasing order.
pub fn singular_values<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<Vec<f64>> {
    Ok(svd(a)?.s)
}
