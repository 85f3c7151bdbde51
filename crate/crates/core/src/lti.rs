//! Realizations of proper rational transfer matrices and validated
//! continuous-time stochastic models.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, cond, numerical_rank, to_complex, CMatrix, Matrix, Tolerances};

/// `C (sI - A)^{-1} B + D`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

impl StateSpace {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = linalg::require_square("A", &a)?;
        if b.nrows() != n {
            return Err(Error::dims("B", format!("expected {n} rows, got {}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::dims("C", format!("expected {n} columns, got {}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::dims(
                "D",
                format!("expected {}x{}, got {}x{}", c.nrows(), b.ncols(), d.nrows(), d.ncols()),
            ));
        }
        linalg::require_finite("A", &a)?;
        linalg::require_finite("B", &b)?;
        linalg::require_finite("C", &c)?;
        linalg::require_finite("D", &d)?;
        Ok(StateSpace { a, b, c, d })
    }

    /// Strictly proper system (D = 0).
    pub fn from_abc(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let d = Matrix::zeros(c.nrows(), b.ncols());
        StateSpace::new(a, b, c, d)
    }

    /// Static gain with no states.
    pub fn gain(d: Matrix) -> Self {
        StateSpace {
            a: Matrix::zeros(0, 0),
            b: Matrix::zeros(0, d.ncols()),
            c: Matrix::zeros(d.nrows(), 0),
            d,
        }
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn eval(&self, s: Complex64) -> Result<CMatrix> {
        tf_eval(self, s)
    }

    /// Sub-system from a subset of inputs to a subset of outputs.
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> StateSpace {
        let (r0, nr) = (rows.start, rows.len());
        let (c0, nc) = (cols.start, cols.len());
        StateSpace {
            a: self.a.clone(),
            b: self.b.columns(c0, nc).into_owned(),
            c: self.c.rows(r0, nr).into_owned(),
            d: self.d.view((r0, c0), (nr, nc)).into_owned(),
        }
    }
}

/// `C (sI - A)^{-1} B + D` at a single complex point.
pub fn tf_eval(ss: &StateSpace, s: Complex64) -> Result<CMatrix> {
    let n = ss.states();
    let d = to_complex(&ss.d);
    if n == 0 {
        return Ok(d);
    }
    let m = CMatrix::identity(n, n) * s - to_complex(&ss.a);
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lu = m.lu();
    let u = lu.u();
    let umin = u.diagonal().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if umin <= 1e-13 * scale * n as f64 {
        return Err(Error::PoleHit { re: s.re, im: s.im });
    }
    let x = lu.solve(&to_complex(&ss.b)).ok_or(Error::PoleHit { re: s.re, im: s.im })?;
    Ok(to_complex(&ss.c) * x + d)
}

/// Orthonormal basis of the reachable subspace of `(A, B)` via the block
/// staircase: each stage keeps the directions of `A * (previous block)` not
/// yet spanned, with rank decided by singular values. The first stage is
/// judged against `||B||`, later ones against `||A||`.
pub(crate) fn reachable_basis(a: &Matrix, b: &Matrix, tol: &Tolerances) -> Matrix {
    let n = a.nrows();
    let mut basis = Matrix::zeros(n, 0);
    if n == 0 || b.ncols() == 0 {
        return basis;
    }
    let mut block = b.clone();
    let mut scale = b.norm();
    let a_scale = a.norm();
    while basis.ncols() < n && scale > 0.0 {
        // two passes of Gram-Schmidt against the current basis
        let mut r = block.clone();
        for _ in 0..2 {
            let proj = &basis * (basis.transpose() * &r);
            r -= proj;
        }
        let svd = crate::linalg::svd::svd(&r).expect("Jacobi SVD converges on finite input");
        let u = svd.u;
        let cut = tol.rank_rtol * n as f64 * scale;
        let keep: Vec<usize> = (0..svd.s.len()).filter(|&i| svd.s[i] > cut).collect();
        if keep.is_empty() {
            break;
        }
        let room = n - basis.ncols();
        let new = Matrix::from_columns(&keep.iter().take(room).map(|&i| u.column(i)).collect::<Vec<_>>());
        basis = concat_columns(&basis, &new);
        block = a * &new;
        scale = a_scale;
    }
    basis
}

fn concat_columns(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Removes unreachable, then unobservable states. The result has the same
/// transfer function and state dimension equal to the McMillan degree.
pub fn minimal_realization(ss: &StateSpace, tol: &Tolerances) -> StateSpace {
    let qr = reachable_basis(&ss.a, &ss.b, tol);
    let a1 = qr.transpose() * &ss.a * &qr;
    let b1 = qr.transpose() * &ss.b;
    let c1 = &ss.c * &qr;
    let qo = reachable_basis(&a1.transpose(), &c1.transpose(), tol);
    StateSpace {
        a: qo.transpose() * &a1 * &qo,
        b: qo.transpose() * b1,
        c: c1 * &qo,
        d: ss.d.clone(),
    }
}

pub fn mcmillan_degree(ss: &StateSpace, tol: &Tolerances) -> usize {
    minimal_realization(ss, tol).states()
}

/// Eigenvalues of the minimal realization's state matrix.
pub fn poles(ss: &StateSpace, tol: &Tolerances) -> Result<Vec<Complex64>> {
    linalg::eigenvalues(&minimal_realization(ss, tol).a)
}

pub fn is_strictly_stable(ss: &StateSpace, tol: &Tolerances) -> Result<bool> {
    Ok(poles(ss, tol)?.iter().all(|p| p.re < -tol.stability_margin))
}

/// Realization of the inverse transfer function:
/// `(A - B D^{-1} C, B D^{-1}, -D^{-1} C, D^{-1})`.
pub fn ss_inverse(ss: &StateSpace) -> Result<StateSpace> {
    if ss.d.nrows() != ss.d.ncols() || cond(&ss.d) >= 1e12 {
        return Err(Error::DNotInvertible);
    }
    let di = ss.d.clone().try_inverse().ok_or(Error::DNotInvertible)?;
    let bdi = &ss.b * &di;
    Ok(StateSpace {
        a: &ss.a - &bdi * &ss.c,
        c: -(&di * &ss.c),
        b: bdi,
        d: di,
    })
}

/// Evaluation points for transfer-function comparisons: 20 log-spaced points
/// `i w`, `w` in `[1e-2, 1e2]`, and 5 seeded points with positive real part.
pub fn probe_points() -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = log_grid(1e-2, 1e2, 20).into_iter().map(|w| Complex64::new(0.0, w)).collect();
    let mut rng = crate::fixtures::rng(0x9e37_79b9);
    for _ in 0..5 {
        pts.push(Complex64::new(rng.random_range(0.1..3.0), rng.random_range(-3.0..3.0)));
    }
    pts
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            let mut g: Vec<f64> = (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect();
            g[0] = lo;
            g[n - 1] = hi;
            g
        }
    }
}

/// Largest relative pointwise difference `||G1(s) - G2(s)|| / (1 + ||G2(s)||)`
/// over `points`. Points that hit a pole of either system are skipped.
pub fn tf_max_diff(g1: &StateSpace, g2: &StateSpace, points: &[Complex64]) -> f64 {
    points
        .iter()
        .filter_map(|&s| match (tf_eval(g1, s), tf_eval(g2, s)) {
            (Ok(x), Ok(y)) => Some((x - &y).norm() / (1.0 + y.norm())),
            _ => None,
        })
        .fold(0.0, f64::max)
}

/// A validated Markovian representation `dx = A x dt + B dw`, `zeta = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtModel {
    ss: StateSpace,
    m: usize,
    labels: Option<Vec<String>>,
}

impl CtModel {
    pub fn ss(&self) -> &StateSpace {
        &self.ss
    }
    pub fn a(&self) -> &Matrix {
        &self.ss.a
    }
    pub fn b(&self) -> &Matrix {
        &self.ss.b
    }
    pub fn c(&self) -> &Matrix {
        &self.ss.c
    }
    pub fn n(&self) -> usize {
        self.ss.states()
    }
    /// Spectral rank, `rank(CB)`.
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn outputs(&self) -> usize {
        self.ss.outputs()
    }
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.outputs() {
            return Err(Error::dims(
                "labels",
                format!("expected {} labels, got {}", self.outputs(), labels.len()),
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// `B B'`.
    pub fn noise_intensity(&self) -> Matrix {
        self.b() * self.b().transpose()
    }
}

/// Checks every structural assumption on `(A, B, C)`: Hurwitz `A`,
/// full-column-rank `B`, reachability, observability and `rank(CB) = cols(B)`.
pub fn validate_ct_model(ss: &StateSpace, tol: &Tolerances) -> Result<CtModel> {
    tol.validate()?;
    if ss.d.iter().any(|&x| x != 0.0) {
        return Err(Error::NonzeroFeedthrough);
    }
    let n = ss.states();
    if n == 0 {
        return Err(Error::dims("A", "model needs at least one state"));
    }
    if ss.inputs() == 0 {
        return Err(Error::BColumnDeficient { rank: 0, cols: 0 });
    }
    let worst = linalg::eigenvalues(&ss.a)?.iter().map(|l| l.re).fold(f64::MIN, f64::max);
    if worst >= -tol.stability_margin {
        return Err(Error::NotStable(worst));
    }
    let cols = ss.inputs();
    let rank_b = numerical_rank(&ss.b, tol);
    if rank_b < cols {
        return Err(Error::BColumnDeficient { rank: rank_b, cols });
    }
    let reachable = reachable_basis(&ss.a, &ss.b, tol).ncols();
    if reachable < n {
        return Err(Error::NotReachable { reachable, n });
    }
    let observable = reachable_basis(&ss.a.transpose(), &ss.c.transpose(), tol).ncols();
    if observable < n {
        return Err(Error::NotObservable { observable, n });
    }
    let cb = &ss.c * &ss.b;
    let rank_cb = numerical_rank(&cb, tol);
    if rank_cb != cols {
        return Err(Error::RankCBDeficient { rank: rank_cb, cols });
    }
    Ok(CtModel {
        ss: ss.clone(),
        m: rank_cb,
        labels: None,
    })
}

/// Diagonal matrix helper used across modules and tests.
pub fn diag(values: &[f64]) -> Matrix {
    Matrix::from_diagonal(&DVector::from_column_slice(values))
}
