//! The deterministic relation `y = F(s) u` hidden in a rank-deficient
//! spectral density.
//!
//! Choosing `m` rows `C0` of `C` with `C0 B` invertible (the u-channels) and
//! writing `K = (C0 B)^{-1}`, `Gamma = A - B K C0 A`, the relation is realized
//! by `(Gamma, B K, C1 Gamma, C1 B K)`, equivalently
//! `F(s) = s C1 (sI - Gamma)^{-1} B K`. The `n`-dimensional realization is
//! never minimal (Gamma is singular), so reports carry both it and its
//! reduction.

use itertools::Itertools;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{self, cond, is_diagonalizable, to_complex, CMatrix, Matrix, Tolerances};
use crate::lti::{is_strictly_stable, minimal_realization, CtModel, StateSpace};
use crate::spectral::PartitionSpec;

/// Maximum number of `m`-subsets examined by the enumeration.
pub const DEFAULT_SELECTION_CAP: usize = 10_000;

/// `C0 B` counts as invertible below this condition number.
pub const ADMISSIBLE_COND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RowSelection {
    rows0: Vec<usize>,
    rows1: Vec<usize>,
}

impl RowSelection {
    /// `rows0` are the u-channels (rows of `C0`); the complement, in original
    /// order, becomes the y-channels.
    pub fn new(rows0: Vec<usize>, total_rows: usize) -> Result<Self> {
        if rows0.iter().any(|&r| r >= total_rows) {
            return Err(Error::InvalidArgument(format!("row index out of range in {rows0:?} (C has {total_rows} rows)")));
        }
        if rows0.iter().unique().count() != rows0.len() {
            return Err(Error::InvalidArgument(format!("duplicate row in {rows0:?}")));
        }
        let rows1 = (0..total_rows).filter(|r| !rows0.contains(r)).collect();
        Ok(RowSelection { rows0, rows1 })
    }

    pub fn rows0(&self) -> &[usize] {
        &self.rows0
    }

    pub fn rows1(&self) -> &[usize] {
        &self.rows1
    }

    /// `y` = rows1, `u` = rows0.
    pub fn partition(&self) -> PartitionSpec {
        PartitionSpec::from_rows(&self.rows1, &self.rows0).expect("selection rows form a permutation")
    }

    pub fn c0(&self, model: &CtModel) -> Matrix {
        model.c().select_rows(&self.rows0)
    }

    pub fn c1(&self, model: &CtModel) -> Matrix {
        model.c().select_rows(&self.rows1)
    }
}

/// Condition number of `C0 B`, or an error if the selection has the wrong size
/// or `C0 B` is not invertible.
pub fn check_selection(model: &CtModel, sel: &RowSelection) -> Result<f64> {
    if sel.rows0.len() != model.m() || sel.rows0.len() + sel.rows1.len() != model.outputs() {
        return Err(Error::InvalidArgument(format!(
            "selection must pick m = {} of {} rows, got {:?}",
            model.m(),
            model.outputs(),
            sel.rows0
        )));
    }
    let c = cond(&(sel.c0(model) * model.b()));
    if c < ADMISSIBLE_COND {
        Ok(c)
    } else {
        Err(Error::InadmissibleSelection {
            rows: sel.rows0.clone(),
            cond: c,
        })
    }
}

pub fn enumerate_selections(model: &CtModel) -> Result<Vec<RowSelection>> {
    enumerate_selections_with(model, DEFAULT_SELECTION_CAP, Exec::default())
}

/// All admissible `m`-subsets of output rows in lexicographic order.
pub fn enumerate_selections_with(model: &CtModel, cap: usize, exec: Exec) -> Result<Vec<RowSelection>> {
    let rows = model.outputs();
    let m = model.m();
    let count = binomial(rows as u128, m as u128);
    if count > cap as u128 {
        return Err(Error::SelectionCapExceeded { count, cap });
    }
    let candidates: Vec<RowSelection> = (0..rows)
        .combinations(m)
        .map(|r0| RowSelection::new(r0, rows).expect("combinations are in range"))
        .collect();
    let ok = exec.map(&candidates, |sel| check_selection(model, sel).is_ok());
    let admissible: Vec<RowSelection> = candidates.into_iter().zip(ok).filter(|(_, ok)| *ok).map(|(s, _)| s).collect();
    if admissible.is_empty() {
        return Err(Error::NoAdmissibleSelection);
    }
    Ok(admissible)
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// `(C0 B)^{-1}` after the admissibility check.
fn c0b_inverse(model: &CtModel, sel: &RowSelection) -> Result<Matrix> {
    check_selection(model, sel)?;
    (sel.c0(model) * model.b()).try_inverse().ok_or(Error::InadmissibleSelection {
        rows: sel.rows0.clone(),
        cond: f64::INFINITY,
    })
}

/// `B (C0 B)^{-1} C0`, an oblique projector of rank `m`.
pub fn selection_projector(model: &CtModel, sel: &RowSelection) -> Result<Matrix> {
    let k = c0b_inverse(model, sel)?;
    Ok(model.b() * k * sel.c0(model))
}

/// `Gamma = A - B (C0 B)^{-1} C0 A`, rounded to its exact rank `n - m`.
///
/// The rounding residue left in the `m` dropped directions would otherwise
/// surface as spurious poles near the origin.
pub fn compute_gamma(model: &CtModel, sel: &RowSelection) -> Result<Matrix> {
    let p = selection_projector(model, sel)?;
    let raw = model.a() - p * model.a();
    let r = model.n() - model.m();
    let mut gamma = Matrix::zeros(model.n(), model.n());
    if r == 0 {
        return Ok(gamma);
    }
    let svd = linalg::svd::svd(&raw)?;
    for i in 0..r {
        gamma += svd.u.column(i) * svd.s[i] * svd.v.column(i).transpose();
    }
    Ok(gamma)
}

/// The `n`-dimensional realization `(Gamma, B K, C1 Gamma, C1 B K)`.
pub fn raw_relation(model: &CtModel, sel: &RowSelection) -> Result<StateSpace> {
    let k = c0b_inverse(model, sel)?;
    let gamma = compute_gamma(model, sel)?;
    let c1 = sel.c1(model);
    let bk = model.b() * &k;
    StateSpace::new(gamma.clone(), bk.clone(), &c1 * &gamma, &c1 * bk)
}

/// Minimal realization of `F(s)` for the selection.
pub fn compute_f(model: &CtModel, sel: &RowSelection, tol: &Tolerances) -> Result<StateSpace> {
    Ok(minimal_realization(&raw_relation(model, sel)?, tol))
}

/// `s C1 (sI - Gamma)^{-1} B (C0 B)^{-1}` evaluated directly.
pub fn f_alternative_eval(model: &CtModel, sel: &RowSelection, s: Complex64) -> Result<CMatrix> {
    let k = c0b_inverse(model, sel)?;
    let gamma = compute_gamma(model, sel)?;
    let n = model.n();
    let lhs = CMatrix::identity(n, n) * s - to_complex(&gamma);
    let x = lhs.lu().solve(&to_complex(&(model.b() * k))).ok_or(Error::PoleHit { re: s.re, im: s.im })?;
    Ok(to_complex(&sel.c1(model)) * x * s)
}

/// Realizations of `N(s) = C1 B + C1 A (sI - A)^{-1} B` and
/// `M(s) = C0 B + C0 A (sI - A)^{-1} B`, with `W(s) = [N; M] / s` after
/// reordering rows to `(y, u)`.
pub fn factor_pair(model: &CtModel, sel: &RowSelection) -> Result<(StateSpace, StateSpace)> {
    let (a, b) = (model.a(), model.b());
    let c0 = sel.c0(model);
    let c1 = sel.c1(model);
    let n = StateSpace::new(a.clone(), b.clone(), &c1 * a, &c1 * b)?;
    let m = StateSpace::new(a.clone(), b.clone(), &c0 * a, &c0 * b)?;
    Ok((n, m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationReport {
    pub selection: RowSelection,
    pub c0b_cond: f64,
    pub gamma: Matrix,
    pub gamma_eigs: Vec<Complex64>,
    pub gamma_rank: usize,
    /// Whether `B (C0 B)^{-1} C0` has a full set of eigenvectors (the
    /// hypothesis of the degree bound `n - m`).
    pub projector_diagonalizable: bool,
    pub raw: StateSpace,
    pub f: StateSpace,
    pub degree: usize,
    pub poles: Vec<Complex64>,
    pub stable: bool,
}

impl RelationReport {
    /// An unstable relation can only be part of a stationary model through a
    /// nonzero feedback path `u = H y + r`.
    pub fn requires_feedback(&self) -> bool {
        !self.stable
    }
}

pub fn classify_selection(model: &CtModel, sel: &RowSelection, tol: &Tolerances) -> Result<RelationReport> {
    let c0b_cond = check_selection(model, sel)?;
    let gamma = compute_gamma(model, sel)?;
    let gamma_eigs = linalg::eigenvalues(&gamma)?;
    let gamma_rank = linalg::numerical_rank(&gamma, tol);
    let projector_diagonalizable = is_diagonalizable(&selection_projector(model, sel)?)?;
    let raw = raw_relation(model, sel)?;
    let f = minimal_realization(&raw, tol);
    let poles = linalg::eigenvalues(&f.a)?;
    let stable = is_strictly_stable(&f, tol)?;
    Ok(RelationReport {
        selection: sel.clone(),
        c0b_cond,
        gamma,
        gamma_eigs,
        gamma_rank,
        projector_diagonalizable,
        degree: f.states(),
        raw,
        f,
        poles,
        stable,
    })
}

/// Reports for every admissible selection, in lexicographic order.
pub fn classify_all(model: &CtModel, tol: &Tolerances, exec: Exec) -> Result<Vec<RelationReport>> {
    let sels = enumerate_selections_with(model, DEFAULT_SELECTION_CAP, exec)?;
    exec.try_map(&sels, |s| classify_selection(model, s, tol))
}

/// First admissible selection (lexicographic) whose relation is strictly
/// stable, if any.
pub fn stable_selection_exists(model: &CtModel, tol: &Tolerances) -> Result<Option<RowSelection>> {
    let reports = classify_all(model, tol, Exec::default())?;
    Ok(reports.into_iter().find(|r| r.stable).map(|r| r.selection))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::lti::{probe_points, tf_eval, validate_ct_model};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn sel(rows0: &[usize], total: usize) -> RowSelection {
        RowSelection::new(rows0.to_vec(), total).unwrap()
    }

    fn close(a: Complex64, re: f64, im: f64, eps: f64) -> bool {
        (a - Complex64::new(re, im)).norm() < eps
    }

    #[test]
    fn example1_selections_and_c0b() {
        let m = fixtures::example1_model();
        let sels = enumerate_selections(&m).unwrap();
        assert_eq!(sels.len(), 4);
        // C0 B for each single row, by direct dot products of C rows with B
        let expected = [4.0, 4.0, -4.0, -4.0];
        for (s, e) in sels.iter().zip(expected) {
            let v = (s.c0(&m) * m.b())[(0, 0)];
            assert!((v - e).abs() < 1e-14);
        }
        assert_eq!(sels[1].rows1(), &[0, 2, 3]);
    }

    #[test]
    fn example2_selections() {
        let m = fixtures::example2_model();
        let sels = enumerate_selections(&m).unwrap();
        assert_eq!(sels.len(), 2);
        let v: Vec<f64> = sels.iter().map(|s| (s.c0(&m) * m.b())[(0, 0)]).collect();
        assert_eq!(v, vec![-3.0, -1.0]);
    }

    #[test]
    fn orthogonal_row_is_excluded() {
        // row 1 of C is orthogonal to B, so C0 B = 0 for that choice
        let ss = StateSpace::from_abc(
            Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]),
            Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
            Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        let m = validate_ct_model(&ss, &tol()).unwrap();
        let sels = enumerate_selections(&m).unwrap();
        assert_eq!(sels.len(), 1);
        assert_eq!(sels[0].rows0(), &[0]);
        assert!(matches!(check_selection(&m, &sel(&[1], 2)), Err(Error::InadmissibleSelection { .. })));
    }

    #[test]
    fn example1_first_gamma() {
        let m = fixtures::example1_model();
        let g = compute_gamma(&m, &sel(&[0], 4)).unwrap();
        let expected = Matrix::from_row_slice(3, 3, &[-9.0, -4.0, -6.0, 9.0, 4.0, 6.0, 1.0, -1.0, 2.0]);
        assert!((&g - expected).amax() < 1e-10);
        let ev = linalg::eigenvalues(&g).unwrap();
        assert!(close(ev[0], -2.0, 0.0, 1e-8) && close(ev[1], -1.0, 0.0, 1e-8) && close(ev[2], 0.0, 0.0, 1e-8));
    }

    #[test]
    fn example2_first_gamma() {
        let m = fixtures::example2_model();
        let g = compute_gamma(&m, &sel(&[0], 2)).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[0.0, 0.0, 3.5, 8.0 / 9.0]);
        assert!((&g - expected).amax() < 1e-12);
    }

    #[test]
    fn square_case_gamma_vanishes_and_f_is_constant() {
        let ss = StateSpace::from_abc(
            Matrix::from_element(1, 1, -1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_column_slice(2, 1, &[1.0, 2.0]),
        )
        .unwrap();
        let m = validate_ct_model(&ss, &tol()).unwrap();
        let s = sel(&[0], 2);
        assert!(compute_gamma(&m, &s).unwrap().amax() < 1e-15);
        let f = compute_f(&m, &s, &tol()).unwrap();
        assert_eq!(f.states(), 0);
        assert!((f.d[(0, 0)] - 2.0).abs() < 1e-15);
        assert_eq!(stable_selection_exists(&m, &tol()).unwrap(), Some(s));
    }

    #[test]
    fn example1_first_relation() {
        let m = fixtures::example1_model();
        let r = classify_selection(&m, &sel(&[0], 4), &tol()).unwrap();
        assert_eq!(r.degree, 2);
        assert!(r.stable);
        assert!(r.projector_diagonalizable);
        assert_eq!(r.gamma_rank, 2);
        assert!(close(r.poles[0], -2.0, 0.0, 1e-8) && close(r.poles[1], -1.0, 0.0, 1e-8));
        for s in probe_points() {
            let v = tf_eval(&r.f, s).unwrap();
            let den = (s + 2.0) * (s + 1.0);
            let want = [(s * s - 9.0) / den, (-s * s - s * 6.0 - 13.0) / den, (-s * s - s * 5.0 + 4.0) / den];
            for i in 0..3 {
                assert!((v[(i, 0)] - want[i]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn example1_second_relation_is_unstable() {
        let m = fixtures::example1_model();
        let r = classify_selection(&m, &sel(&[1], 4), &tol()).unwrap();
        assert!(!r.stable);
        assert!(r.requires_feedback());
        assert!(close(r.poles[0], -3.0, 0.0, 1e-8) && close(r.poles[1], 3.0, 0.0, 1e-8));
    }

    #[test]
    fn example2_relations() {
        let m = fixtures::example2_model();
        let r0 = classify_selection(&m, &sel(&[0], 2), &tol()).unwrap();
        assert_eq!(r0.poles.len(), 1);
        assert!(close(r0.poles[0], 8.0 / 9.0, 0.0, 1e-8));
        assert!(!r0.stable);
        let r1 = classify_selection(&m, &sel(&[1], 2), &tol()).unwrap();
        assert!(close(r1.poles[0], 79.0 / 6.0, 0.0, 1e-8));
        assert!(close(r1.gamma_eigs[0], 0.0, 0.0, 1e-8) && close(r1.gamma_eigs[1], 79.0 / 6.0, 0.0, 1e-8));
        assert_eq!(stable_selection_exists(&m, &tol()).unwrap(), None);
        // the two scalar relations are reciprocal
        for s in probe_points() {
            let p = tf_eval(&r0.f, s).unwrap()[(0, 0)] * tf_eval(&r1.f, s).unwrap()[(0, 0)];
            assert!(close(p, 1.0, 0.0, 1e-8));
        }
    }

    #[test]
    fn alternative_form_agrees() {
        let m = fixtures::example1_model();
        for rows in 0..4 {
            let s = sel(&[rows], 4);
            let f = compute_f(&m, &s, &tol()).unwrap();
            for p in probe_points() {
                let direct = f_alternative_eval(&m, &s, p).unwrap();
                assert!((tf_eval(&f, p).unwrap() - direct).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn stable_selection_for_example1() {
        let m = fixtures::example1_model();
        assert_eq!(stable_selection_exists(&m, &tol()).unwrap(), Some(sel(&[0], 4)));
    }

    #[test]
    fn selection_validation() {
        assert!(RowSelection::new(vec![4], 4).is_err());
        assert!(RowSelection::new(vec![1, 1], 4).is_err());
        let m = fixtures::example1_model();
        assert!(matches!(check_selection(&m, &sel(&[0, 1], 4)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn cap_is_enforced() {
        let m = fixtures::example1_model();
        assert!(matches!(
            enumerate_selections_with(&m, 3, Exec::Sequential),
            Err(Error::SelectionCapExceeded { count: 4, cap: 3 })
        ));
        assert_eq!(binomial(50, 25), 126_410_606_437_752);
    }
}
