//! Matrix exponential by scaling and squaring with the [13/13] Pade approximant.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Inputs with a larger 1-norm are rejected instead of computed inaccurately.
pub const EXPM_NORM_BOUND: f64 = 50.0;

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

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `e^M` for a finite square matrix with `||M||_1 <= 50`.
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Invalid("matrix exponential of a non-square matrix".into()));
    }
    if !crate::linalg::all_finite(m) {
        return Err(Error::NonFinite("matrix exponential input".into()));
    }
    let norm = norm1(m);
    if norm > EXPM_NORM_BOUND {
        return Err(Error::NormTooLarge { norm, bound: EXPM_NORM_BOUND });
    }
    let n = m.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    if norm == 0.0 {
        return Ok(id);
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = m * 2f64.powi(-s);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Singular("Pade denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}
