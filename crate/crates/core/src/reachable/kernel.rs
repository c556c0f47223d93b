//! Matrix paths `tau -> W(tau)` on `[0, 1]` feeding the support integrals.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// A matrix-valued path on `[0, 1]` with `rows x cols` values.
pub trait KernelPath: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// Writes `W(tau) xi` into `out`.
    fn apply(&self, tau: f64, xi: &[f64], out: &mut [f64]);
}

/// `W(tau) = sum_k tau^k C_k`.
#[derive(Debug, Clone)]
pub struct PolynomialPath {
    coeffs: Vec<DMatrix<f64>>,
}

impl PolynomialPath {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = coeffs.first().ok_or_else(|| Error::Invalid("empty polynomial path".into()))?;
        let shape = first.shape();
        if coeffs.iter().any(|c| c.shape() != shape) {
            return Err(Error::Invalid("polynomial path coefficients differ in shape".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }
}

impl KernelPath for PolynomialPath {
    fn rows(&self) -> usize {
        self.coeffs[0].nrows()
    }

    fn cols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    fn apply(&self, tau: f64, xi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for c in self.coeffs.iter().rev() {
            for (i, o) in out.iter_mut().enumerate() {
                let mut s = 0.0;
                for (j, x) in xi.iter().enumerate() {
                    s += c[(i, j)] * x;
                }
                *o = *o * tau + s;
            }
        }
    }
}

const CHEB_DEGREE: usize = 16;
const MAX_PANELS: usize = 1024;

/// Piecewise Chebyshev interpolant (second-kind points, barycentric form) of
/// a matrix path, refined until it reproduces the path between its nodes.
#[derive(Debug, Clone)]
pub struct ChebyshevTable {
    rows: usize,
    cols: usize,
    panels: usize,
    /// Node abscissae on the reference panel `[-1, 1]`.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Row-major matrix values, `panels * (degree + 1)` entries.
    values: Vec<Vec<f64>>,
    max_error: f64,
}

fn reference_nodes() -> (Vec<f64>, Vec<f64>) {
    let d = CHEB_DEGREE;
    let nodes = (0..=d).map(|j| -(std::f64::consts::PI * j as f64 / d as f64).cos()).collect();
    let weights = (0..=d)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == d {
                0.5 * s
            } else {
                s
            }
        })
        .collect();
    (nodes, weights)
}

impl ChebyshevTable {
    /// Builds the table from `batch`, which maps a sorted list of `tau`
    /// values to the path matrices there, refining until the relative
    /// interpolation error is below `rtol`.
    pub fn build(batch: impl Fn(&[f64]) -> Result<Vec<DMatrix<f64>>>, rtol: f64) -> Result<Self> {
        let (nodes, weights) = reference_nodes();
        let mut panels = 2;
        loop {
            let taus: Vec<f64> = (0..panels)
                .flat_map(|p| nodes.iter().map(move |&x| (p as f64 + 0.5 * (x + 1.0)) / panels as f64))
                .collect();
            let mats = batch(&taus)?;
            let (rows, cols) = mats[0].shape();
            if mats.iter().any(|m| !linalg::all_finite(m)) {
                return Err(Error::NonFinite("kernel path values".into()));
            }
            let values = mats.iter().map(|m| m.transpose().as_slice().to_vec()).collect();
            let mut table = Self { rows, cols, panels, nodes: nodes.clone(), weights: weights.clone(), values, max_error: 0.0 };

            // Check against the path at points between consecutive nodes.
            let checks: Vec<f64> = (0..panels)
                .flat_map(|p| {
                    let nodes = &nodes;
                    (0..CHEB_DEGREE).map(move |j| {
                        let x = 0.5 * (nodes[j] + nodes[j + 1]);
                        (p as f64 + 0.5 * (x + 1.0)) / panels as f64
                    })
                })
                .collect();
            let exact = batch(&checks)?;
            let scale = mats.iter().map(linalg::max_abs).fold(f64::MIN_POSITIVE, f64::max);
            let mut err: f64 = 0.0;
            let mut buf = vec![0.0; rows * cols];
            for (tau, m) in checks.iter().zip(&exact) {
                table.interpolate(*tau, &mut buf);
                let mt = m.transpose();
                for (a, b) in buf.iter().zip(mt.as_slice()) {
                    err = err.max((a - b).abs());
                }
            }
            table.max_error = err / scale;
            if table.max_error <= rtol || panels >= MAX_PANELS {
                if table.max_error > rtol {
                    log::warn!("kernel interpolation error {:e} above target at {panels} panels", table.max_error);
                }
                return Ok(table);
            }
            panels *= 2;
        }
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// Relative interpolation error measured at build time.
    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    fn locate(&self, tau: f64) -> (usize, f64) {
        let s = tau.clamp(0.0, 1.0) * self.panels as f64;
        let p = (s.floor() as usize).min(self.panels - 1);
        (p, 2.0 * (s - p as f64) - 1.0)
    }

    /// Row-major `W(tau)` into `out`.
    fn interpolate(&self, tau: f64, out: &mut [f64]) {
        let (p, x) = self.locate(tau);
        let base = p * (CHEB_DEGREE + 1);
        if let Some(j) = self.nodes.iter().position(|&nj| nj == x) {
            out.copy_from_slice(&self.values[base + j]);
            return;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut denom = 0.0;
        for j in 0..=CHEB_DEGREE {
            let c = self.weights[j] / (x - self.nodes[j]);
            denom += c;
            for (o, v) in out.iter_mut().zip(&self.values[base + j]) {
                *o += c * v;
            }
        }
        out.iter_mut().for_each(|o| *o /= denom);
    }
}

impl KernelPath for ChebyshevTable {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, tau: f64, xi: &[f64], out: &mut [f64]) {
        let (p, x) = self.locate(tau);
        let base = p * (CHEB_DEGREE + 1);
        let row_apply = |vals: &[f64], out: &mut [f64], c: f64| {
            for (i, o) in out.iter_mut().enumerate() {
                let r = &vals[i * self.cols..(i + 1) * self.cols];
                *o += c * r.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            }
        };
        out.iter_mut().for_each(|o| *o = 0.0);
        if let Some(j) = self.nodes.iter().position(|&nj| nj == x) {
            row_apply(&self.values[base + j], out, 1.0);
            return;
        }
        let mut denom = 0.0;
        for j in 0..=CHEB_DEGREE {
            let c = self.weights[j] / (x - self.nodes[j]);
            denom += c;
            row_apply(&self.values[base + j], out, c);
        }
        out.iter_mut().for_each(|o| *o /= denom);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_path_horner() {
        let p = PolynomialPath::new(vec![
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 2.0]),
            DMatrix::from_row_slice(1, 2, &[3.0, 0.0]),
        ])
        .unwrap();
        let mut out = [0.0];
        p.apply(0.5, &[1.0, 1.0], &mut out);
        assert!((out[0] - (1.0 + 1.0 + 0.75)).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_reproduces_exponential_path() {
        let f = |t: f64| DMatrix::from_row_slice(2, 2, &[(3.0 * t).exp(), t.sin(), 0.0, (-5.0 * t).exp()]);
        let table = ChebyshevTable::build(|taus| Ok(taus.iter().map(|&t| f(t)).collect()), 1e-13).unwrap();
        assert!(table.max_error() <= 1e-13);
        let mut out = [0.0; 2];
        for k in 0..=50 {
            let t = k as f64 / 50.0 + 1e-3 * (k as f64).sin();
            let t = t.clamp(0.0, 1.0);
            table.apply(t, &[1.0, -2.0], &mut out);
            let m = f(t);
            assert!((out[0] - (m[(0, 0)] - 2.0 * m[(0, 1)])).abs() < 1e-11);
            assert!((out[1] - (-2.0 * m[(1, 1)])).abs() < 1e-11);
        }
    }
}
