use nalgebra::{DMatrix, DVector};

use super::body::{linear_image, LinearMap, SupportBody};
use super::grid::DirectionGrid;
use crate::error::{Error, Result};
use crate::linalg;

/// Least-squares ellipsoid `xi^T Q xi ~ h(xi)^2` over the grid, projected to
/// SPD by clamping eigenvalues below `1e-10 * lambda_max`.
pub fn fit_ellipsoid(body: &SupportBody, grid: &DirectionGrid) -> Result<DMatrix<f64>> {
    let n = body.dim();
    let p = n * (n + 1) / 2;
    if grid.len() < p {
        return Err(Error::GridTooSmall(format!("{} directions for {p} ellipsoid parameters", grid.len())));
    }
    let h = body.check_nondegenerate(grid)?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let design = DMatrix::from_fn(grid.len(), p, |k, c| {
        let (i, j) = pairs[c];
        let d = grid.direction(k);
        if i == j {
            d[i] * d[i]
        } else {
            2.0 * d[i] * d[j]
        }
    });
    if linalg::numerical_rank(&design) < p {
        return Err(Error::GridTooSmall("rank-deficient normal equations".into()));
    }
    let rhs = DVector::from_iterator(grid.len(), h.iter().map(|v| v * v));
    let qr = design.qr();
    let sol = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * rhs))
        .ok_or_else(|| Error::GridTooSmall("least squares failed".into()))?;
    let mut q = DMatrix::zeros(n, n);
    for (c, &(i, j)) in pairs.iter().enumerate() {
        q[(i, j)] = sol[c];
        q[(j, i)] = sol[c];
    }
    let lmax = q.clone().symmetric_eigen().eigenvalues.max();
    if !(lmax > 0.0) {
        return Err(Error::DegenerateBody("fitted form has no positive eigenvalue".into()));
    }
    let floor = 1e-10 * lmax;
    Ok(linalg::sym_apply(&q, |l| l.max(floor)))
}

/// A map `W` such that `W * body` is close to round, refined by re-fitting
/// the already whitened body `iters` times.
pub fn whitening_map(body: &SupportBody, grid: &DirectionGrid, iters: usize) -> Result<DMatrix<f64>> {
    let n = body.dim();
    let mut w = DMatrix::identity(n, n);
    let mut current = body.clone();
    for _ in 0..iters.max(1) {
        let q = fit_ellipsoid(&current, grid)?;
        let s = linalg::sym_apply(&q, |l| 1.0 / l.sqrt());
        w = &s * w;
        current = linear_image(body, &LinearMap::new(w.clone())?)?;
    }
    Ok(w)
}
