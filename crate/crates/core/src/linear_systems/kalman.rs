use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// `[B, AB, ..., A^{n-1} B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Invalid("A must be square".into()));
    }
    if b.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.nrows() });
    }
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    Ok(out)
}

/// Rank of the controllability matrix and whether it equals `n`.
pub fn kalman_check(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(usize, bool)> {
    let c = controllability_matrix(a, b)?;
    let rank = linalg::numerical_rank(&c);
    Ok((rank, rank == a.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(kalman_check(&a, &b).unwrap(), (2, true));
        assert_eq!(kalman_check(&DMatrix::zeros(2, 2), &DMatrix::zeros(2, 1)).unwrap(), (0, false));
        assert_eq!(kalman_check(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2)).unwrap(), (2, true));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(kalman_check(&DMatrix::zeros(2, 2), &DMatrix::zeros(3, 1)).is_err());
    }
}
