//! Feedback models `y = F u + v`, `u = H y + r` and their closed loop
//!
//! ```text
//! [y]   [P   PF] [v]      P = (I - F H)^{-1}
//! [u] = [QH  Q ] [r],     Q = (I - H F)^{-1}
//! ```
//!
//! The closed loop is built as one state-space interconnection, so every
//! block carries its own pole set. Pointwise inversion is used only to check
//! the result.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{self, cond, CMatrix, Matrix, Tolerances};
use crate::lti::{is_strictly_stable, minimal_realization, probe_points, tf_eval, StateSpace};
use crate::spectral::default_grid;

/// `I - D_F D_H` must have condition number below this for the loop to be
/// well posed.
pub const WELL_POSED_COND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackModel {
    f: StateSpace,
    h: StateSpace,
    phi_v: Option<StateSpace>,
    phi_r: Option<StateSpace>,
}

impl FeedbackModel {
    /// `F` is `p x q`, `H` is `q x p`.
    pub fn new(f: StateSpace, h: StateSpace) -> Result<Self> {
        if h.outputs() != f.inputs() || h.inputs() != f.outputs() {
            return Err(Error::dims(
                "H",
                format!(
                    "F is {}x{} so H must be {}x{}, got {}x{}",
                    f.outputs(),
                    f.inputs(),
                    f.inputs(),
                    f.outputs(),
                    h.outputs(),
                    h.inputs()
                ),
            ));
        }
        Ok(FeedbackModel { f, h, phi_v: None, phi_r: None })
    }

    /// Noise spectra given by factors: `Phi_v = G_v G_v^*`, `Phi_r = G_r G_r^*`.
    /// `None` means a zero spectrum. `v` and `r` are taken as uncorrelated.
    pub fn with_noise(mut self, g_v: Option<StateSpace>, g_r: Option<StateSpace>) -> Result<Self> {
        if let Some(g) = &g_v {
            if g.outputs() != self.p() {
                return Err(Error::dims("phi_v", format!("factor must have {} outputs, got {}", self.p(), g.outputs())));
            }
        }
        if let Some(g) = &g_r {
            if g.outputs() != self.q() {
                return Err(Error::dims("phi_r", format!("factor must have {} outputs, got {}", self.q(), g.outputs())));
            }
        }
        self.phi_v = g_v;
        self.phi_r = g_r;
        Ok(self)
    }

    pub fn f(&self) -> &StateSpace {
        &self.f
    }
    pub fn h(&self) -> &StateSpace {
        &self.h
    }
    pub fn p(&self) -> usize {
        self.f.outputs()
    }
    pub fn q(&self) -> usize {
        self.f.inputs()
    }

    /// `Phi_v(i omega)` (zero when no factor is set).
    pub fn phi_v_eval(&self, omega: f64) -> Result<CMatrix> {
        noise_eval(self.phi_v.as_ref(), self.p(), omega)
    }

    pub fn phi_r_eval(&self, omega: f64) -> Result<CMatrix> {
        noise_eval(self.phi_r.as_ref(), self.q(), omega)
    }
}

fn noise_eval(g: Option<&StateSpace>, dim: usize, omega: f64) -> Result<CMatrix> {
    match g {
        None => Ok(CMatrix::zeros(dim, dim)),
        Some(g) => {
            let w = tf_eval(g, Complex64::new(0.0, omega))?;
            Ok(&w * w.adjoint())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    /// Full interconnection from `[v; r]` to `[y; u]`.
    pub t: StateSpace,
    /// Minimal realizations of the four blocks.
    pub p_block: StateSpace,
    pub pf_block: StateSpace,
    pub qh_block: StateSpace,
    pub q_block: StateSpace,
    /// All four blocks strictly stable.
    pub internally_stable: bool,
    /// `max ||N(s) T(s) - I||` over the probe points.
    pub inverse_residual: f64,
}

impl ClosedLoop {
    pub fn blocks(&self) -> [&StateSpace; 4] {
        [&self.p_block, &self.pf_block, &self.qh_block, &self.q_block]
    }
}

fn blkdiag(a: &Matrix, b: &Matrix) -> Matrix {
    let mut m = Matrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

/// State-space interconnection of the loop, with `F` and `H` first reduced
/// to minimal form so that the closed-loop state matrix has no hidden modes.
pub fn interconnection(fm: &FeedbackModel, tol: &Tolerances) -> Result<StateSpace> {
    let f = minimal_realization(&fm.f, tol);
    let h = minimal_realization(&fm.h, tol);
    let (p, q) = (fm.p(), fm.q());
    let (nf, nh) = (f.states(), h.states());

    // E [y; u] = blkdiag(C_F, C_H) x + [v; r]
    let mut e = Matrix::identity(p + q, p + q);
    e.view_mut((0, p), (p, q)).copy_from(&(-&f.d));
    e.view_mut((p, 0), (q, p)).copy_from(&(-&h.d));
    let loop_gain = Matrix::identity(p, p) - &f.d * &h.d;
    let c = cond(&loop_gain);
    if c.is_nan() || c >= WELL_POSED_COND {
        return Err(Error::AlgebraicLoopSingular);
    }
    let e_inv = e.try_inverse().ok_or(Error::AlgebraicLoopSingular)?;

    // x_F is driven by u, x_H by y
    let mut b_sel = Matrix::zeros(nf + nh, p + q);
    b_sel.view_mut((0, p), (nf, q)).copy_from(&f.b);
    b_sel.view_mut((nf, 0), (nh, p)).copy_from(&h.b);

    let c_cl = &e_inv * blkdiag(&f.c, &h.c);
    let a_cl = blkdiag(&f.a, &h.a) + &b_sel * &c_cl;
    let b_cl = &b_sel * &e_inv;
    StateSpace::new(a_cl, b_cl, c_cl, e_inv)
}

/// `N(s) = [[I, -F(s)], [-H(s), I]]`.
pub fn loop_matrix_eval(fm: &FeedbackModel, s: Complex64) -> Result<CMatrix> {
    let (p, q) = (fm.p(), fm.q());
    let f = tf_eval(&fm.f, s)?;
    let h = tf_eval(&fm.h, s)?;
    let mut n = CMatrix::identity(p + q, p + q);
    n.view_mut((0, p), (p, q)).copy_from(&(-f));
    n.view_mut((p, 0), (q, p)).copy_from(&(-h));
    Ok(n)
}

pub fn closed_loop_t(fm: &FeedbackModel, tol: &Tolerances) -> Result<ClosedLoop> {
    let t = interconnection(fm, tol)?;
    let (p, q) = (fm.p(), fm.q());

    let mut residual: f64 = 0.0;
    let mut any_regular = false;
    for s in probe_points() {
        let (Ok(n), Ok(tv)) = (loop_matrix_eval(fm, s), tf_eval(&t, s)) else {
            continue;
        };
        let ifh = CMatrix::identity(p, p) - n.view((0, p), (p, q)) * n.view((p, 0), (q, p));
        if cond(&ifh) < WELL_POSED_COND {
            any_regular = true;
        }
        let r = (&n * &tv - CMatrix::identity(p + q, p + q)).norm();
        residual = residual.max(if r.is_nan() { f64::INFINITY } else { r });
    }
    if !any_regular {
        return Err(Error::AlgebraicLoopSingular);
    }

    let block = |r: std::ops::Range<usize>, c: std::ops::Range<usize>| minimal_realization(&t.block(r, c), tol);
    let p_block = block(0..p, 0..p);
    let pf_block = block(0..p, p..p + q);
    let qh_block = block(p..p + q, 0..p);
    let q_block = block(p..p + q, p..p + q);
    let mut internally_stable = true;
    for b in [&p_block, &pf_block, &qh_block, &q_block] {
        internally_stable &= is_strictly_stable(b, tol)?;
    }
    Ok(ClosedLoop {
        t,
        p_block,
        pf_block,
        qh_block,
        q_block,
        internally_stable,
        inverse_residual: residual,
    })
}

/// Internal stability from the closed-loop state matrix: every eigenvalue of
/// the interconnection (with minimal `F`, `H`) in the open left half plane.
pub fn internal_stability(fm: &FeedbackModel, tol: &Tolerances) -> Result<bool> {
    let t = interconnection(fm, tol)?;
    Ok(linalg::eigenvalues(&t.a)?.iter().all(|l| l.re < -tol.stability_margin))
}

/// `max ||PF - FQ||` and `||HP - QH||` over `i omega` for `omega` in `grid`,
/// each relative to `1 + ` the size of the terms.
pub fn verify_interchange_identities(fm: &FeedbackModel, cl: &ClosedLoop, grid: &[f64], exec: Exec) -> f64 {
    exec.max_of(grid, |&w| {
        let s = Complex64::new(0.0, w);
        let eval = || -> Result<f64> {
            let (f, h) = (tf_eval(&fm.f, s)?, tf_eval(&fm.h, s)?);
            let p = tf_eval(&cl.p_block, s)?;
            let q = tf_eval(&cl.q_block, s)?;
            let (pf, fq) = (&p * &f, &f * &q);
            let (hp, qh) = (&h * &p, &q * &h);
            let r1 = (&pf - &fq).norm() / (1.0 + pf.norm().max(fq.norm()));
            let r2 = (&hp - &qh).norm() / (1.0 + hp.norm().max(qh.norm()));
            Ok(r1.max(r2))
        };
        // a pole on the grid says nothing about the identity
        eval().unwrap_or(0.0)
    })
}

/// `sup ||G(i omega)||` over the default grid; a pole on the grid counts as
/// unbounded.
pub fn sup_norm_on_grid(g: &StateSpace) -> f64 {
    default_grid()
        .iter()
        .map(|&w| tf_eval(g, Complex64::new(0.0, w)).map(|m| m.norm()).unwrap_or(f64::INFINITY))
        .fold(0.0, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
}

/// `u` Granger-causes `y` exactly when `F` is not identically zero.
pub fn granger_causes(f: &StateSpace, tol: &Tolerances) -> bool {
    sup_norm_on_grid(f) > tol.residual_tol
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedbackVerdict {
    /// `H` vanishes on the grid: no feedback from `y` to `u`.
    pub h_zero: bool,
    pub f_stable: bool,
    /// No feedback but an unstable `F`: such a pair cannot describe a
    /// stationary process.
    pub inconsistent_model: bool,
}

impl FeedbackVerdict {
    pub fn feedback_free(&self) -> bool {
        self.h_zero
    }
}

pub fn feedback_free(h: &StateSpace, f: &StateSpace, tol: &Tolerances) -> Result<FeedbackVerdict> {
    let h_zero = sup_norm_on_grid(h) <= tol.residual_tol;
    let f_stable = is_strictly_stable(&minimal_realization(f, tol), tol)?;
    Ok(FeedbackVerdict {
        h_zero,
        f_stable,
        inconsistent_model: h_zero && !f_stable,
    })
}

/// `Phi_zeta(i omega) = T diag(Phi_v, Phi_r) T^*` for uncorrelated `v`, `r`.
pub fn closed_loop_spectrum(fm: &FeedbackModel, cl: &ClosedLoop, omega: f64) -> Result<CMatrix> {
    let (p, q) = (fm.p(), fm.q());
    let t = tf_eval(&cl.t, Complex64::new(0.0, omega))?;
    let mut noise = CMatrix::zeros(p + q, p + q);
    noise.view_mut((0, 0), (p, p)).copy_from(&fm.phi_v_eval(omega)?);
    noise.view_mut((p, p), (q, q)).copy_from(&fm.phi_r_eval(omega)?);
    Ok(&t * noise * t.adjoint())
}
