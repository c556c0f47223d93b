//! Cheap off-grid evaluation of an expensive support function.
//!
//! The body is first whitened (`W * body` close to round), then its support
//! function is tabulated on the faces `y_f = 1` of the cube and interpolated
//! with tensor-product cubic Lagrange stencils. Evenness of `h` means only
//! the `n` positive faces are needed.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::body::SupportBody;
use crate::error::Result;

pub(crate) fn default_cells(dim: usize) -> usize {
    match dim {
        1 | 2 => 4096,
        3 => 96,
        _ => 12,
    }
}

pub(crate) struct CubeSurrogate {
    dim: usize,
    /// Nodes per face coordinate: cells + 3 (one ghost node each side).
    len: usize,
    delta: f64,
    /// `W^{-T}`: maps a direction into the whitened frame.
    to_white: DMatrix<f64>,
    faces: Vec<Vec<f64>>,
}

impl CubeSurrogate {
    /// `w` whitens the body: `w * body` should be roughly round.
    pub fn build(body: &SupportBody, w: &DMatrix<f64>, cells: usize) -> Result<Self> {
        let dim = body.dim();
        let len = cells + 3;
        let delta = 2.0 / cells as f64;
        let wt = w.transpose();
        let winv = crate::linalg::invert(w, "whitening map")?;
        let per_face = len.pow(dim as u32 - 1);
        let mut dirs = Vec::with_capacity(dim * per_face);
        for f in 0..dim {
            for idx in 0..per_face {
                let mut p = DVector::zeros(dim);
                let mut rest = idx;
                for j in (0..dim).filter(|&j| j != f) {
                    let k = rest % len;
                    rest /= len;
                    p[j] = -1.0 + (k as f64 - 1.0) * delta;
                }
                p[f] = 1.0;
                dirs.push(&wt * p);
            }
        }
        let values: Vec<f64> = if body.is_expensive() {
            dirs.par_iter().map(|d| body.support(d.as_slice())).collect::<Result<_>>()?
        } else {
            dirs.iter().map(|d| body.support(d.as_slice())).collect::<Result<_>>()?
        };
        let faces = values.chunks(per_face).map(<[f64]>::to_vec).collect();
        Ok(Self { dim, len, delta, to_white: winv.transpose(), faces })
    }

    #[inline]
    fn weights(t: f64) -> [f64; 4] {
        [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ]
    }

    /// Interpolated support value at a direction in the original frame.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        let mut y = [0.0f64; 8];
        for i in 0..n {
            y[i] = (0..n).map(|j| self.to_white[(i, j)] * x[j]).sum();
        }
        let (f, s) = (0..n).map(|i| (i, y[i])).fold((0, 0.0f64), |acc, (i, v): (usize, f64)| if v.abs() > acc.1.abs() { (i, v) } else { acc });
        if s == 0.0 {
            return 0.0;
        }
        let face = &self.faces[f];
        let mut base = [0usize; 7];
        let mut w = [[0.0f64; 4]; 7];
        let mut c = 0;
        for j in (0..n).filter(|&j| j != f) {
            let u = y[j] / s;
            let p = (u + 1.0) / self.delta + 1.0;
            let k0 = (p.floor() as isize - 1).clamp(0, self.len as isize - 4) as usize;
            w[c] = Self::weights(p - (k0 + 1) as f64);
            base[c] = k0;
            c += 1;
        }
        let mut acc = 0.0;
        let combos = 4usize.pow(c as u32);
        for combo in 0..combos {
            let mut rest = combo;
            let mut weight = 1.0;
            let mut idx = 0;
            let mut stride = 1;
            for d in 0..c {
                let o = rest % 4;
                rest /= 4;
                weight *= w[d][o];
                idx += (base[d] + o) * stride;
                stride *= self.len;
            }
            acc += weight * face[idx];
        }
        s.abs() * acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_bodies::{make_primitive, Primitive};

    #[test]
    fn reproduces_ellipsoids() {
        for dim in [2, 3] {
            let q = DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 + i as f64 } else { 0.2 });
            let body = make_primitive(Primitive::Ellipsoid { q: q.clone() }).unwrap();
            let w = crate::linalg::sym_apply(&q, |l| 1.0 / l.sqrt());
            let s = CubeSurrogate::build(&body, &w, default_cells(dim)).unwrap();
            for k in 0..50 {
                let x: Vec<f64> = (0..dim).map(|i| ((k * 7 + i * 3) as f64 * 0.37).sin()).collect();
                let exact = body.support(&x).unwrap();
                let err = (s.eval(&x) - exact).abs() / exact;
                assert!(err < if dim == 2 { 1e-8 } else { 1e-5 }, "dim {dim}: {err:e}");
            }
        }
    }

    #[test]
    fn polygon_error_is_small() {
        let body = make_primitive(Primitive::Zonotope { generators: vec![vec![1.0, 0.2], vec![-0.3, 1.0], vec![0.5, 0.5]] }).unwrap();
        let s = CubeSurrogate::build(&body, &DMatrix::identity(2, 2), 256).unwrap();
        for k in 0..200 {
            let t = k as f64 * 0.0314;
            let x = [t.cos(), t.sin()];
            let exact = body.support(&x).unwrap();
            assert!((s.eval(&x) - exact).abs() < 1e-3 * exact);
        }
    }
}
