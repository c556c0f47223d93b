//! Composite Gauss-Legendre quadrature with panel doubling.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const GAUSS_ORDER: usize = 8;
pub const MAX_DOUBLINGS: usize = 12;

/// Nodes and weights of the 8-point rule on `[-1, 1]`, by Newton iteration
/// on the Legendre polynomial.
pub fn gauss_legendre() -> &'static [(f64, f64); GAUSS_ORDER] {
    static RULE: OnceLock<[(f64, f64); GAUSS_ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_ORDER;
        let mut out = [(0.0, 0.0); GAUSS_ORDER];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

fn composite(f: &mut impl FnMut(f64) -> f64, breaks: &[f64], panels: usize) -> f64 {
    let rule = gauss_legendre();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let h = (w[1] - w[0]) / panels as f64;
        for p in 0..panels {
            let a = w[0] + p as f64 * h;
            let mid = a + 0.5 * h;
            let mut s = 0.0;
            for &(x, wt) in rule {
                s += wt * f(mid + 0.5 * h * x);
            }
            total += 0.5 * h * s;
        }
    }
    total
}

/// Outcome of an integration: value, panels per piece, last relative change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOutcome {
    pub value: f64,
    pub panels: usize,
    pub change: f64,
}

/// Integrates `f` over the pieces delimited by `breaks`, doubling the panel
/// count of every piece until two successive totals agree to `rtol`.
pub fn integrate_pieces(mut f: impl FnMut(f64) -> f64, breaks: &[f64], rtol: f64) -> Result<QuadratureOutcome> {
    let mut panels = 1;
    let mut prev = composite(&mut f, breaks, panels);
    let mut change = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let next = composite(&mut f, breaks, panels);
        change = if next == prev { 0.0 } else { (next - prev).abs() / next.abs().max(f64::MIN_POSITIVE) };
        if change <= rtol {
            return Ok(QuadratureOutcome { value: next, panels, change });
        }
        prev = next;
    }
    Err(Error::QuadratureStall { doublings: MAX_DOUBLINGS, change })
}
