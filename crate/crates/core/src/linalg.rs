//! Small dense linear-algebra helpers shared across modules.
//!
//! Every rank decision in the crate goes through [`numerical_rank`], so that
//! Kalman tests, controllability indices and the dual filtration agree on
//! what "dependent" means.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold used for every rank decision.
pub const RANK_RTOL: f64 = 1e-10;

/// Eigenpairs of the Jordan-Wielandt matrix `[[0, M], [M^T, 0]]`, whose
/// eigenvalues are `+-sigma_i` plus `|p - q|` zeros. nalgebra's bidiagonal
/// SVD loses accuracy on some rank-deficient inputs (reconstruction errors
/// of order 1e-2 on rank-one projectors); its symmetric eigensolver does not,
/// so every singular-value computation goes through it.
fn jordan_wielandt(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (p, q) = m.shape();
    let mut h = DMatrix::zeros(p + q, p + q);
    h.view_mut((0, p), (p, q)).copy_from(m);
    h.view_mut((p, 0), (q, p)).copy_from(&m.transpose());
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Square triangular factor with the singular values of `m`: `R` from
/// `M = QR` (tall) or `M^T = QR` (wide).
fn square_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = m.shape();
    if p > q {
        m.clone().qr().r()
    } else if q > p {
        m.transpose().qr().r()
    } else {
        m.clone()
    }
}

/// Orthonormal eigenvectors of a projector-valued matrix with eigenvalue
/// above one half.
fn projector_basis(proj: &DMatrix<f64>) -> DMatrix<f64> {
    let n = proj.nrows();
    let sym = (proj + proj.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut picked: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.5)
        .map(|(i, &l)| (l, eig.eigenvectors.column(i).into_owned()))
        .collect();
    picked.sort_by(|a, b| b.0.total_cmp(&a.0));
    if picked.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&picked.into_iter().map(|(_, v)| v).collect::<Vec<_>>())
    }
}

/// Eigenvectors of the Jordan-Wielandt matrix in the numerically-zero
/// cluster `|lambda| <= RANK_RTOL * sigma_max`.
fn zero_cluster(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = jordan_wielandt(m);
    let smax = vals.iter().copied().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = vals
        .iter()
        .enumerate()
        .filter(|(_, &l)| smax == 0.0 || l.abs() <= RANK_RTOL * smax)
        .map(|(i, _)| vecs.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m.nrows() + m.ncols(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Singular values of `m`, sorted non-increasing.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let r = square_factor(m);
    let k = r.nrows();
    let (mut vals, _) = jordan_wielandt(&r);
    vals.sort_by(|a, b| b.total_cmp(a));
    vals.truncate(k);
    vals.iter().map(|v| v.max(0.0)).collect()
}

/// Rank with threshold `RANK_RTOL * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > RANK_RTOL * smax).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the kernel of `m`, which has `ncols`
/// columns. An empty `m` has the whole space as kernel.
pub fn kernel_basis(m: &DMatrix<f64>, ncols: usize) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return DMatrix::identity(ncols, ncols);
    }
    // a tall matrix has the kernel of its triangular factor
    let m = if m.nrows() > ncols { m.clone().qr().r() } else { m.clone() };
    let p = m.nrows();
    // the zero cluster spans ker M^T (+) ker M, so its lower block is the
    // orthogonal projector onto ker M
    let lower = zero_cluster(&m).rows(p, ncols).into_owned();
    projector_basis(&(&lower * lower.transpose()))
}

/// Orthonormal basis of the column space of `m`.
pub fn range_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    if m.ncols() > n {
        // M^T = QR gives range(M) = range(R^T)
        return range_basis(&m.transpose().qr().r().transpose());
    }
    if n > m.ncols() {
        let qr = m.clone().qr();
        return qr.q() * range_basis(&qr.r());
    }
    let upper = zero_cluster(m).rows(0, n).into_owned();
    projector_basis(&(DMatrix::identity(n, n) - &upper * upper.transpose()))
}

/// 2-norm condition number.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn invert(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Symmetric eigen-decomposition applied as `f(lambda)` on the spectrum.
pub fn sym_apply(q: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let sym = (q + q.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Builds a matrix from nested row vectors, checking the shape.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Invalid("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_kernel_of_rank_one() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 2.0]);
        assert_eq!(numerical_rank(&m), 1);
        let k = kernel_basis(&m, 3);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-12);
        assert!((k.transpose() * &k - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn empty_constraints_give_full_kernel() {
        let k = kernel_basis(&DMatrix::zeros(0, 2), 2);
        assert_eq!(k, DMatrix::identity(2, 2));
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        assert_eq!(numerical_rank(&DMatrix::zeros(2, 2)), 0);
        assert_eq!(range_basis(&DMatrix::zeros(2, 2)).ncols(), 0);
    }

    #[test]
    fn rank_one_projector_bases_are_exact() {
        // a bidiagonal SVD reconstructs this matrix with error ~3e-2
        let v = DVector::from_vec(vec![0.04100996955, -0.1891217, 0.9810974]);
        let v = v.normalize();
        let m = &v * v.transpose();
        assert_eq!(numerical_rank(&m), 1);
        assert!((singular_values(&m)[0] - 1.0).abs() < 1e-14);
        let r = range_basis(&m);
        assert_eq!(r.ncols(), 1);
        assert!((&r * r.transpose() - &m).amax() < 1e-14);
        let k = kernel_basis(&m, 3);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).amax() < 1e-14);
    }

    #[test]
    fn tall_and_wide_inputs() {
        let m = DMatrix::from_fn(7, 3, |i, j| (0.3 * i as f64).powi(j as i32));
        let s = singular_values(&m);
        assert_eq!(s.len(), 3);
        assert_eq!(singular_values(&m.transpose()), s);
        let r = range_basis(&m);
        assert_eq!(r.ncols(), 3);
        assert!((&r * (r.transpose() * &m) - &m).amax() < 1e-12);
        let k = kernel_basis(&m.transpose(), 7);
        assert_eq!(k.ncols(), 4);
        assert!((m.transpose() * &k).amax() < 1e-12);
    }
}
