use nalgebra::DMatrix;

use super::system::LtiSystem;
use crate::convex_bodies::LinearMap;
use crate::error::{Error, Result};
use crate::linalg;

/// Closes the loop with `u -> u + C_fb x`: `A <- A + B C_fb`.
pub fn apply_feedback(sys: &LtiSystem, c_fb: &DMatrix<f64>) -> Result<LtiSystem> {
    if c_fb.shape() != (sys.m(), sys.n()) {
        return Err(Error::Invalid(format!(
            "feedback must be {}x{}, got {}x{}",
            sys.m(),
            sys.n(),
            c_fb.nrows(),
            c_fb.ncols()
        )));
    }
    LtiSystem::new(sys.a() + sys.b() * c_fb, sys.b().clone(), sys.control().clone())
}

/// State change `x = C y`: `(C^{-1} A C, C^{-1} B, U)`.
pub fn apply_gauge(sys: &LtiSystem, c: &LinearMap) -> Result<LtiSystem> {
    if c.dim() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), got: c.dim() });
    }
    let scale = linalg::max_abs(c.matrix()).max(f64::MIN_POSITIVE).powi(sys.n() as i32);
    if c.det().abs() <= 1e-12 * scale {
        return Err(Error::Singular("gauge transformation".into()));
    }
    let cinv = c.inverse()?;
    LtiSystem::new(cinv.matrix() * sys.a() * c.matrix(), cinv.matrix() * sys.b(), sys.control().clone())
}
