//! Exact sampling of a continuous-time model and the inverse map.
//!
//! Sampling `dx = A x dt + B dw` with period `h` gives
//! `x[k+1] = A_d x[k] + B_d v[k]` where `A_d = e^{Ah}` and
//! `Q_d = B_d B_d' = int_0^h e^{As} B B' e^{A's} ds`. `Q_d` is positive
//! definite for any reachable `(A, B)`, so a rank deficiency of `B B'` is
//! invisible in the sampled model. Desampling recovers it.

use crate::error::{Error, Result};
use crate::linalg::{
    matrix_exp, matrix_log_principal_tol, numerical_rank, psd_factor, require_finite, require_square, solve_lyap_continuous,
    solve_lyap_discrete, symmetrize, Matrix, Tolerances,
};
use crate::lti::{validate_ct_model, CtModel, StateSpace};
use nalgebra::SymmetricEigen;

/// Largest allowed asymmetry of a supplied `Q_d`, relative to its norm.
const SYMMETRY_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledModel {
    pub ad: Matrix,
    pub bd: Matrix,
    pub cd: Matrix,
    pub h: f64,
    pub qd: Matrix,
}

fn check_h(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveH(h))
    }
}

impl SampledModel {
    /// From `(A_d, Q_d, C_d, h)` as read from a file. `Q_d` must be symmetric
    /// PSD; `B_d` is its factor.
    pub fn new(ad: Matrix, qd: Matrix, cd: Matrix, h: f64, tol: &Tolerances) -> Result<Self> {
        check_h(h)?;
        let n = require_square("Ad", &ad)?;
        if qd.shape() != (n, n) {
            return Err(Error::dims("Qd", format!("expected {n}x{n}, got {}x{}", qd.nrows(), qd.ncols())));
        }
        if cd.ncols() != n {
            return Err(Error::dims("Cd", format!("expected {n} columns, got {}", cd.ncols())));
        }
        require_finite("Ad", &ad)?;
        require_finite("Qd", &qd)?;
        require_finite("Cd", &cd)?;
        if (&qd - qd.transpose()).norm() > SYMMETRY_RTOL * qd.norm() {
            return Err(Error::InvalidArgument("Qd is not symmetric".into()));
        }
        let qd = symmetrize(&qd);
        let bd = psd_factor(&qd, tol)?;
        Ok(SampledModel { ad, bd, cd, h, qd })
    }

    /// From `(A_d, B_d, C_d, h)`; `Q_d = B_d B_d'`.
    pub fn from_bd(ad: Matrix, bd: Matrix, cd: Matrix, h: f64, tol: &Tolerances) -> Result<Self> {
        let n = require_square("Ad", &ad)?;
        if bd.nrows() != n {
            return Err(Error::dims("Bd", format!("expected {n} rows, got {}", bd.nrows())));
        }
        require_finite("Bd", &bd)?;
        let qd = &bd * bd.transpose();
        SampledModel::new(ad, qd, cd, h, tol)
    }

    pub fn n(&self) -> usize {
        self.ad.nrows()
    }
}

/// `(A_d, Q_d)` for period `h`, with `Q_d` from the block exponential of
/// `[[A, Q], [0, -A']] h`: its top blocks are `e^{Ah}` and `G`, and
/// `Q_d = G e^{A'h}`.
pub fn discretize(a: &Matrix, q: &Matrix, h: f64) -> Result<(Matrix, Matrix)> {
    check_h(h)?;
    let n = require_square("A", a)?;
    let mut m = Matrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(q);
    m.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let e = matrix_exp(&m, h)?;
    let ad = e.view((0, 0), (n, n)).into_owned();
    let g = e.view((0, n), (n, n)).into_owned();
    let qd = symmetrize(&(g * ad.transpose()));
    Ok((ad, qd))
}

pub fn sample(model: &CtModel, h: f64, tol: &Tolerances) -> Result<SampledModel> {
    let (ad, qd) = discretize(model.a(), &model.noise_intensity(), h)?;
    let bd = psd_factor(&qd, tol)?;
    Ok(SampledModel {
        ad,
        bd,
        cd: model.c().clone(),
        h,
        qd,
    })
}

/// Relative residuals of `A P + P A' + B B' = 0` and `P = A_d P A_d' + Q_d`
/// for the single `P` solving the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovResiduals {
    pub continuous: f64,
    pub discrete: f64,
}

impl LyapunovResiduals {
    pub fn max(&self) -> f64 {
        self.continuous.max(self.discrete)
    }
}

fn relative(r: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

pub fn dual_lyapunov_check(model: &CtModel, sm: &SampledModel) -> Result<LyapunovResiduals> {
    let (a, bbt) = (model.a(), model.noise_intensity());
    let p = solve_lyap_continuous(a, &bbt)?;
    let rc = a * &p + &p * a.transpose() + &bbt;
    let rd = &p - &sm.ad * &p * sm.ad.transpose() - &sm.qd;
    Ok(LyapunovResiduals {
        continuous: relative(rc.norm(), bbt.norm()),
        discrete: relative(rd.norm(), sm.qd.norm()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesampleDiagnostics {
    /// `A_d` has a principal logarithm.
    pub logm_exists: bool,
    /// `Q_d` is numerically nonsingular.
    pub qd_nonsingular: bool,
    /// `A P + P A'` is negative semidefinite, `A = log(A_d) / h`,
    /// `P = A_d P A_d' + Q_d`.
    pub neg_semidef_ok: bool,
    /// Residuals of the two Lyapunov equations for the recovered `(A, B)`;
    /// `None` when no `B` was recovered.
    pub residuals: Option<LyapunovResiduals>,
    /// Columns of the recovered `B` (0 when nothing was recovered).
    pub recovered_rank: usize,
    /// Largest eigenvalue of `A P + P A'` (when it could be formed).
    pub max_eig_apq: Option<f64>,
    /// `min eig(Q_d) / max eig(Q_d)`.
    pub qd_eig_ratio: f64,
}

impl DesampleDiagnostics {
    pub fn ok(&self) -> bool {
        self.logm_exists && self.qd_nonsingular && self.neg_semidef_ok
    }

    /// The first failed condition, in the order they are stated.
    pub fn failure(&self) -> Option<Error> {
        if !self.logm_exists {
            Some(Error::LogFailure)
        } else if !self.qd_nonsingular {
            Some(Error::QdSingular)
        } else if !self.neg_semidef_ok {
            Some(Error::NotSemidefinite(self.max_eig_apq.unwrap_or(f64::NAN)))
        } else {
            None
        }
    }
}

/// The recovered state-space data; `b` is empty unless every condition holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Desampled {
    pub diagnostics: DesampleDiagnostics,
    pub a: Option<Matrix>,
    pub b: Option<Matrix>,
    pub c: Matrix,
}

/// Evaluates all three conditions without stopping at the first failure.
pub fn desample_diagnose(sm: &SampledModel, tol: &Tolerances) -> Result<Desampled> {
    tol.validate()?;
    check_h(sm.h)?;

    let log = match matrix_log_principal_tol(&sm.ad, tol) {
        Ok(l) => Some(l),
        Err(Error::ExistenceFailure { .. } | Error::SingularInput) => None,
        Err(e) => return Err(e),
    };

    let eig = SymmetricEigen::new(sm.qd.clone()).eigenvalues;
    let (lmin, lmax) = (eig.min(), eig.max());
    let qd_eig_ratio = if lmax > 0.0 { lmin / lmax } else { 0.0 };
    let qd_nonsingular = lmax > 0.0 && lmin > tol.psd_tol * lmax;

    let mut diagnostics = DesampleDiagnostics {
        logm_exists: log.is_some(),
        qd_nonsingular,
        neg_semidef_ok: false,
        residuals: None,
        recovered_rank: 0,
        max_eig_apq: None,
        qd_eig_ratio,
    };
    let a = log.map(|l| l / sm.h);
    let mut b = None;
    if let Some(a) = &a {
        let p = solve_lyap_discrete(&sm.ad, &sm.qd)?;
        let s = symmetrize(&(a * &p + &p * a.transpose()));
        let smax = SymmetricEigen::new(s.clone()).eigenvalues.max();
        diagnostics.max_eig_apq = Some(smax);
        diagnostics.neg_semidef_ok = smax <= tol.psd_tol * s.norm();
        if diagnostics.ok() {
            let bb = psd_factor(&(-&s), tol)?;
            let bbt = &bb * bb.transpose();
            let rc = a * &p + &p * a.transpose() + &bbt;
            let rd = &p - &sm.ad * &p * sm.ad.transpose() - &sm.qd;
            diagnostics.residuals = Some(LyapunovResiduals {
                continuous: relative(rc.norm(), bbt.norm()),
                discrete: relative(rd.norm(), sm.qd.norm()),
            });
            diagnostics.recovered_rank = bb.ncols();
            b = Some(bb);
        }
    }
    Ok(Desampled {
        diagnostics,
        a,
        b,
        c: sm.cd.clone(),
    })
}

/// Recovers the continuous-time model, failing with the first violated
/// condition.
pub fn desample(sm: &SampledModel, tol: &Tolerances) -> Result<(CtModel, DesampleDiagnostics)> {
    let d = desample_diagnose(sm, tol)?;
    if let Some(e) = d.diagnostics.failure() {
        return Err(e);
    }
    let (a, b) = (d.a.expect("recovered A"), d.b.expect("recovered B"));
    let model = validate_ct_model(&StateSpace::from_abc(a, b, d.c)?, tol)?;
    Ok((model, d.diagnostics))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenRankReport {
    pub h: f64,
    pub n: usize,
    /// `rank(B B')`.
    pub m: usize,
    pub qd_rank: usize,
    pub recovered_rank: usize,
    /// `||A_rec - A|| / ||A||`.
    pub a_error: f64,
    /// `||B_rec B_rec' - B B'|| / ||B B'||`.
    pub bbt_error: f64,
    pub diagnostics: DesampleDiagnostics,
}

impl HiddenRankReport {
    /// Sampling hid the deficiency and desampling restored it.
    pub fn restored(&self) -> bool {
        self.qd_rank == self.n && self.recovered_rank == self.m
    }
}

pub fn hidden_rank_report(model: &CtModel, h: f64, tol: &Tolerances) -> Result<HiddenRankReport> {
    let sm = sample(model, h, tol)?;
    let (rec, diagnostics) = desample(&sm, tol)?;
    let bbt = model.noise_intensity();
    Ok(HiddenRankReport {
        h,
        n: model.n(),
        m: numerical_rank(&bbt, tol),
        qd_rank: numerical_rank(&sm.qd, tol),
        recovered_rank: diagnostics.recovered_rank,
        a_error: (rec.a() - model.a()).norm() / model.a().norm(),
        bbt_error: (rec.noise_intensity() - &bbt).norm() / bbt.norm(),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::lti::diag;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn scalar_model() -> CtModel {
        let ss = StateSpace::from_abc(diag(&[-1.0]), diag(&[2f64.sqrt()]), diag(&[1.0])).unwrap();
        validate_ct_model(&ss, &tol()).unwrap()
    }

    /// `e^{At}` for a 2x2 `A` with distinct real eigenvalues `l1`, `l2`
    /// (Sylvester's formula).
    fn exp2(a: &Matrix, l1: f64, l2: f64, t: f64) -> Matrix {
        let i = Matrix::identity(2, 2);
        (a - &i * l2) * ((l1 * t).exp() / (l1 - l2)) + (a - &i * l1) * ((l2 * t).exp() / (l2 - l1))
    }

    /// Composite Simpson rule for the `Q_d` integral.
    fn qd_quadrature(a: &Matrix, bbt: &Matrix, h: f64, steps: usize) -> Matrix {
        let dt = h / steps as f64;
        let mut acc = Matrix::zeros(2, 2);
        for k in 0..=steps {
            let w = if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let e = exp2(a, -1.0, -2.0, k as f64 * dt);
            acc += &e * bbt * e.transpose() * w;
        }
        acc * (dt / 3.0)
    }

    #[test]
    fn scalar_sample() {
        let h = 2f64.ln();
        let sm = sample(&scalar_model(), h, &tol()).unwrap();
        assert!((sm.ad[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((sm.qd[(0, 0)] - 0.75).abs() < 1e-14);
        let r = dual_lyapunov_check(&scalar_model(), &sm).unwrap();
        assert!(r.max() < 1e-14);
    }

    #[test]
    fn scalar_desample() {
        let h = 2f64.ln();
        let sm = SampledModel::new(diag(&[0.5]), diag(&[0.75]), diag(&[1.0]), h, &tol()).unwrap();
        let (m, d) = desample(&sm, &tol()).unwrap();
        assert!((m.a()[(0, 0)] + 1.0).abs() < 1e-12);
        assert!((m.noise_intensity()[(0, 0)] - 2.0).abs() < 1e-12);
        assert_eq!(d.recovered_rank, 1);
    }

    #[test]
    fn diagonal_a() {
        let ss = StateSpace::from_abc(diag(&[-1.0, -3.0]), Matrix::from_element(2, 1, 1.0), Matrix::from_element(1, 2, 1.0)).unwrap();
        let m = validate_ct_model(&ss, &tol()).unwrap();
        let sm = sample(&m, 0.2, &tol()).unwrap();
        assert!((sm.ad[(0, 0)] - (-0.2f64).exp()).abs() < 1e-15);
        assert!((sm.ad[(1, 1)] - (-0.6f64).exp()).abs() < 1e-15);
        assert!(sm.ad[(0, 1)].abs() < 1e-16 && sm.ad[(1, 0)].abs() < 1e-16);
    }

    #[test]
    fn example2_qd_matches_quadrature_and_has_full_rank() {
        let m = fixtures::example2_model();
        let h = 0.05;
        let sm = sample(&m, h, &tol()).unwrap();
        let oracle = qd_quadrature(m.a(), &m.noise_intensity(), h, 2000);
        assert!((&sm.qd - &oracle).norm() < 1e-12 * oracle.norm());
        assert!((&sm.ad - exp2(m.a(), -1.0, -2.0, h)).norm() < 1e-14);
        assert_eq!(numerical_rank(&sm.qd, &tol()), 2);
        assert_eq!(numerical_rank(&m.noise_intensity(), &tol()), 1);
    }

    #[test]
    fn non_positive_h() {
        let m = scalar_model();
        assert_eq!(sample(&m, 0.0, &tol()), Err(Error::NonPositiveH(0.0)));
        assert!(matches!(sample(&m, -1.0, &tol()), Err(Error::NonPositiveH(_))));
        assert!(matches!(sample(&m, f64::NAN, &tol()), Err(Error::NonPositiveH(_))));
    }

    #[test]
    fn dual_lyapunov_examples() {
        for (m, h) in [(fixtures::example1_model(), 0.1), (fixtures::example2_model(), 0.5)] {
            let sm = sample(&m, h, &tol()).unwrap();
            assert!(dual_lyapunov_check(&m, &sm).unwrap().max() < 1e-8);
        }
    }

    #[test]
    fn example_round_trips_restore_rank() {
        for (m, n) in [(fixtures::example2_model(), 2), (fixtures::example1_model(), 3)] {
            let r = hidden_rank_report(&m, 0.1, &tol()).unwrap();
            assert_eq!((r.m, r.qd_rank, r.recovered_rank), (1, n, 1));
            assert!(r.a_error < 1e-6 && r.bbt_error < 1e-6, "{r:?}");
            assert!(r.restored());
        }
    }

    #[test]
    fn full_rank_b_hides_nothing() {
        let ss = StateSpace::from_abc(
            Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]),
            Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 1.0]),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let m = validate_ct_model(&ss, &tol()).unwrap();
        let r = hidden_rank_report(&m, 0.1, &tol()).unwrap();
        assert_eq!((r.m, r.qd_rank, r.recovered_rank), (2, 2, 2));
    }

    #[test]
    fn log_failure() {
        let sm = SampledModel::new(diag(&[-0.5, 0.5]), Matrix::identity(2, 2), Matrix::identity(2, 2), 0.1, &tol()).unwrap();
        let d = desample_diagnose(&sm, &tol()).unwrap();
        assert!(!d.diagnostics.logm_exists && d.diagnostics.qd_nonsingular);
        assert_eq!(desample(&sm, &tol()).unwrap_err(), Error::LogFailure);
    }

    #[test]
    fn qd_singular() {
        let sm = SampledModel::new(diag(&[0.5, 0.25]), diag(&[1.0, 0.0]), Matrix::identity(2, 2), 0.1, &tol()).unwrap();
        let d = desample_diagnose(&sm, &tol()).unwrap();
        assert!(d.diagnostics.logm_exists && !d.diagnostics.qd_nonsingular);
        assert_eq!(desample(&sm, &tol()).unwrap_err(), Error::QdSingular);
    }

    #[test]
    fn perturbed_qd_is_not_semidefinite() {
        let m = fixtures::example1_model();
        let mut sm = sample(&m, 1.0, &tol()).unwrap();
        sm.qd += Matrix::identity(3, 3) * 0.5;
        let d = desample_diagnose(&sm, &tol()).unwrap().diagnostics;
        assert!(d.logm_exists && d.qd_nonsingular && !d.neg_semidef_ok);
        assert!(d.max_eig_apq.unwrap() > 1.0);
        assert!(matches!(desample(&sm, &tol()), Err(Error::NotSemidefinite(_))));
    }

    #[test]
    fn semigroup() {
        let m = fixtures::example1_model();
        let a = sample(&m, 0.3, &tol()).unwrap().ad;
        let b = sample(&m, 0.45, &tol()).unwrap().ad;
        let ab = sample(&m, 0.75, &tol()).unwrap().ad;
        assert!((a * b - ab).norm() < 1e-8);
    }

    #[test]
    fn file_constructors_validate() {
        let t = tol();
        assert!(matches!(
            SampledModel::new(diag(&[0.5, 0.5]), diag(&[1.0]), diag(&[1.0, 1.0]), 0.1, &t),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            SampledModel::new(diag(&[0.5]), diag(&[-1.0]), diag(&[1.0]), 0.1, &t),
            Err(Error::NotPsd(_))
        ));
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(SampledModel::new(diag(&[0.5, 0.5]), asym, Matrix::identity(2, 2), 0.1, &t).is_err());
        let sm = SampledModel::from_bd(diag(&[0.5]), Matrix::from_element(1, 2, 1.0), diag(&[1.0]), 0.1, &t).unwrap();
        assert!((sm.qd[(0, 0)] - 2.0).abs() < 1e-15);
        assert!(matches!(SampledModel::new(diag(&[0.5]), diag(&[1.0]), diag(&[1.0]), 0.0, &t), Err(Error::NonPositiveH(_))));
    }
}
