use nalgebra::DMatrix;

use super::system::MatrixFn;
use crate::error::{Error, Result};

/// Taylor coefficients `A_0..A_K`, `B_0..B_K` at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorData {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    /// The arrays describe polynomial data exactly (higher orders vanish).
    pub polynomial: bool,
}

impl TaylorData {
    pub fn new(a: Vec<DMatrix<f64>>, b: Vec<DMatrix<f64>>) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::MissingTaylor("empty coefficient list".into()));
        }
        let n = a[0].nrows();
        let m = b[0].ncols();
        if a.iter().any(|x| x.shape() != (n, n)) || b.iter().any(|x| x.shape() != (n, m)) {
            return Err(Error::Invalid("inconsistent Taylor coefficient shapes".into()));
        }
        // pad the shorter list with zeros; the declared order is the common length
        let order = a.len().max(b.len()) - 1;
        let mut out = Self { a, b, polynomial: false };
        out = out.padded(order);
        Ok(out)
    }

    pub fn order(&self) -> usize {
        self.a.len().min(self.b.len()) - 1
    }

    pub fn n(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn m(&self) -> usize {
        self.b[0].ncols()
    }

    pub fn truncated(&self, order: usize) -> Self {
        Self { a: self.a[..=order].to_vec(), b: self.b[..=order].to_vec(), polynomial: self.polynomial }
    }

    /// Zero-extends to `order`, treating the data as exact polynomials.
    pub fn padded(&self, order: usize) -> Self {
        let (n, m) = (self.n(), self.m());
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        a.resize(order.max(a.len() - 1) + 1, DMatrix::zeros(n, n));
        b.resize(order.max(b.len() - 1) + 1, DMatrix::zeros(n, m));
        Self { a, b, polynomial: self.polynomial }
    }

    pub fn is_polynomial(&self) -> bool {
        self.polynomial
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Central difference of order `j` at 0 with step `h`; O(h^2) accurate.
fn central_derivative(f: &MatrixFn, j: usize, h: f64) -> DMatrix<f64> {
    let mut acc = f(0.0) * 0.0;
    for i in 0..=j {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += f((j as f64 / 2.0 - i as f64) * h) * (sign * binomial(j, i));
    }
    acc / h.powi(j as i32)
}

/// Taylor coefficients `f^(j)(0) / j!` for `j = 0..=order` from
/// Richardson-extrapolated central differences. The step grows with `j` to
/// balance truncation against cancellation, never below 1e-3.
pub fn finite_difference_taylor(f: &MatrixFn, order: usize) -> Vec<DMatrix<f64>> {
    (0..=order)
        .map(|j| {
            if j == 0 {
                return f(0.0);
            }
            let h = f64::EPSILON.powf(1.0 / (j as f64 + 4.0)).max(1e-3);
            let d1 = central_derivative(f, j, h);
            let d2 = central_derivative(f, j, h / 2.0);
            (d2 * 4.0 - d1) / 3.0 / factorial(j)
        })
        .collect()
}
