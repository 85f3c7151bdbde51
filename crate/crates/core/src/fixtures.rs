//! The two worked examples with rank-one spectral density, plus seeded random
//! generators used by tests, the acceptance suite and the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{Matrix, Tolerances};
use crate::lti::{validate_ct_model, CtModel, StateSpace};

/// Three states, four outputs, one noise input: two selections admit a stable
/// relation and two do not.
pub fn example1() -> StateSpace {
    StateSpace::from_abc(
        Matrix::from_row_slice(3, 3, &[-9.0, -4.0, -6.0, 6.0, 1.0, 6.0, 4.0, 2.0, 2.0]),
        Matrix::from_column_slice(3, 1, &[0.0, 4.0, -4.0]),
        Matrix::from_row_slice(4, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0, 0.0, 0.0, 1.0, 3.0, 1.0, 2.0]),
    )
    .expect("example 1 dimensions")
}

/// Two states, two outputs: every selection yields an unstable relation.
pub fn example2() -> StateSpace {
    StateSpace::from_abc(
        Matrix::from_row_slice(2, 2, &[-3.0, -4.0 / 3.0, 1.5, 0.0]),
        Matrix::from_column_slice(2, 1, &[-3.0, -2.0]),
        Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, -1.0]),
    )
    .expect("example 2 dimensions")
}

pub fn example1_model() -> CtModel {
    validate_ct_model(&example1(), &Tolerances::default()).expect("example 1 is a valid model")
}

pub fn example2_model() -> CtModel {
    validate_ct_model(&example2(), &Tolerances::default()).expect("example 2 is a valid model")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Hurwitz matrix with every eigenvalue real part at most `-margin`:
/// negative definite symmetric part plus a skew part.
pub fn hurwitz(rng: &mut impl Rng, n: usize, margin: f64) -> Matrix {
    let x = uniform(rng, n, n);
    let y = uniform(rng, n, n);
    -(&x * x.transpose() / n as f64 + Matrix::identity(n, n) * margin) + (&y - y.transpose())
}

/// Random valid continuous-time model with `n` states, spectral rank `m` and
/// `outputs >= m` output channels.
pub fn random_model(rng: &mut impl Rng, n: usize, m: usize, outputs: usize) -> CtModel {
    assert!(m >= 1 && m <= n && outputs >= m);
    let tol = Tolerances::default();
    loop {
        let a = hurwitz(rng, n, 0.5);
        let b = uniform(rng, n, m);
        let c = uniform(rng, outputs, n);
        let ss = StateSpace::from_abc(a, b, c).expect("consistent dimensions");
        if let Ok(model) = validate_ct_model(&ss, &tol) {
            if crate::linalg::cond(&(model.c() * model.b()).rows(0, m).into_owned()) < 1e4 {
                return model;
            }
        }
    }
}

/// Random system of order `n`; when `stable` is false the spectrum is shifted
/// so that at least one pole is in the right half plane.
pub fn random_system(rng: &mut impl Rng, n: usize, inputs: usize, outputs: usize, stable: bool) -> StateSpace {
    let mut a = hurwitz(rng, n, 0.5);
    if !stable && n > 0 {
        let shift = rng.random_range(1.0..2.0);
        let l = crate::linalg::eigenvalues(&a).expect("square").iter().map(|l| l.re).fold(f64::MIN, f64::max);
        a += Matrix::identity(n, n) * (shift - l);
    }
    StateSpace::new(a, uniform(rng, n, inputs), uniform(rng, outputs, n), uniform(rng, outputs, inputs))
        .expect("consistent dimensions")
}

/// Random realization of order `n_min + extra` that contains unreachable and
/// unobservable states, hidden by a random similarity transform.
pub fn random_nonminimal(rng: &mut impl Rng, n_min: usize, extra: usize, inputs: usize, outputs: usize) -> StateSpace {
    let core = random_system(rng, n_min, inputs, outputs, true);
    let n = n_min + extra;
    let mut a = Matrix::zeros(n, n);
    let mut b = Matrix::zeros(n, inputs);
    let mut c = Matrix::zeros(outputs, n);
    a.view_mut((0, 0), (n_min, n_min)).copy_from(&core.a);
    b.view_mut((0, 0), (n_min, inputs)).copy_from(&core.b);
    c.view_mut((0, 0), (outputs, n_min)).copy_from(&core.c);
    for i in 0..extra {
        a[(n_min + i, n_min + i)] = -rng.random_range(0.5..2.0);
    }
    // Split the extra states between unreachable (coupled into the output)
    // and unobservable (driven by the input) ones.
    let unreach = extra / 2 + extra % 2;
    for i in 0..extra {
        let row = n_min + i;
        if i < unreach {
            for j in 0..outputs {
                c[(j, row)] = rng.random_range(-1.0..1.0);
            }
        } else {
            for j in 0..inputs {
                b[(row, j)] = rng.random_range(-1.0..1.0);
            }
        }
    }
    let t = uniform(rng, n, n) * (0.5 / n as f64) + Matrix::identity(n, n);
    let ti = t.clone().try_inverse().expect("diagonally dominated transform");
    StateSpace::new(&t * a * &ti, &t * b, c * &ti, core.d).expect("consistent dimensions")
}
