use super::{norm_1, require_finite, require_square, Matrix};
use crate::error::{Error, Result};

// [13/13] Padé coefficients and the 1-norm bound under which the approximant
// is accurate to double precision without further scaling.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// `exp(M t)` by scaling and squaring with the diagonal [13/13] Padé
/// approximant. The scaling exponent is chosen from the 1-norm of `M t`.
pub fn matrix_exp(m: &Matrix, t: f64) -> Result<Matrix> {
    let n = require_square("M", m)?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time argument must be finite, got {t}")));
    }
    require_finite("M", m)?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let a = m * t;
    let norm = norm_1(&a);
    if norm == 0.0 {
        return Ok(Matrix::identity(n, n));
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);

    let b = &PADE13;
    let id = Matrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom.lu().solve(&numer).ok_or(Error::SingularInput)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}
