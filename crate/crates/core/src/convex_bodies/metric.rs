//! Grid-level containment factors and the Banach-Mazur distance.

use super::body::SupportBody;
use super::grid::DirectionGrid;
use crate::error::{check_dim, Result};

/// `max(1, max_k h_outer_target[k] / h_inner[k])` from paired samples.
pub(crate) fn factor_from_samples(h1: &[f64], h2: &[f64]) -> f64 {
    h1.iter().zip(h2).map(|(a, b)| b / a).fold(1.0, f64::max)
}

/// Unclamped log-product `log(max h2/h1 * max h1/h2)`: the distance after the
/// best rescaling of one body.
pub(crate) fn scaled_log_product(h1: &[f64], h2: &[f64]) -> (f64, f64, f64) {
    let mut up = 0.0f64;
    let mut down = 0.0f64;
    for (a, b) in h1.iter().zip(h2) {
        up = up.max(b / a);
        down = down.max(a / b);
    }
    ((up * down).ln(), up, down)
}

/// `t(omega1, omega2) = inf { t >= 1 : t omega1 contains omega2 }`, on the grid.
pub fn containment_factor(omega1: &SupportBody, omega2: &SupportBody, grid: &DirectionGrid) -> Result<f64> {
    check_dim(omega1.dim(), omega2.dim())?;
    let h1 = omega1.check_nondegenerate(grid)?;
    let h2 = omega2.sample(grid)?;
    Ok(factor_from_samples(&h1, &h2))
}

/// `rho = log(t(omega1, omega2) * t(omega2, omega1))` on the grid.
pub fn bm_distance(omega1: &SupportBody, omega2: &SupportBody, grid: &DirectionGrid) -> Result<f64> {
    check_dim(omega1.dim(), omega2.dim())?;
    let h1 = omega1.check_nondegenerate(grid)?;
    let h2 = omega2.check_nondegenerate(grid)?;
    Ok((factor_from_samples(&h1, &h2) * factor_from_samples(&h2, &h1)).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_bodies::{linear_image, make_primitive, LinearMap, Primitive};
    use crate::error::Error;

    fn ball() -> SupportBody {
        make_primitive(Primitive::Ball { dim: 2, radius: 1.0 }).unwrap()
    }

    fn square() -> SupportBody {
        make_primitive(Primitive::Box { half_widths: vec![1.0, 1.0] }).unwrap()
    }

    #[test]
    fn containment_examples() {
        let grid = DirectionGrid::new(2, 720).unwrap();
        assert_eq!(containment_factor(&ball(), &ball(), &grid).unwrap(), 1.0);
        // the grid contains the diagonal at 45 degrees
        let t = containment_factor(&ball(), &square(), &grid).unwrap();
        assert!((t - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(containment_factor(&square(), &ball(), &grid).unwrap(), 1.0);
    }

    #[test]
    fn bm_examples() {
        let grid = DirectionGrid::new(2, 720).unwrap();
        assert_eq!(bm_distance(&square(), &square(), &grid).unwrap(), 0.0);
        let rho = bm_distance(&ball(), &square(), &grid).unwrap();
        assert!((rho - 0.5 * 2f64.ln()).abs() < 1e-12);
        let big = linear_image(&square(), &LinearMap::scalar(2, 2.0)).unwrap();
        let rho = bm_distance(&square(), &big, &grid).unwrap();
        assert!((rho - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn coarse_grid_underestimates_and_refinement_is_monotone() {
        // 2^k-refined grids are nested, so the maximum can only grow
        let mut last = 0.0;
        for count in [6, 12, 24, 48, 96] {
            let grid = DirectionGrid::new(2, count).unwrap();
            let t = containment_factor(&ball(), &square(), &grid).unwrap();
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn degenerate_inner_body_rejected() {
        use std::sync::Arc;
        let grid = DirectionGrid::new(2, 8).unwrap();
        let flat = SupportBody::from_fn(2, crate::convex_bodies::BodyKind::Primitive, Arc::new(|x: &[f64]| Ok(x[0].abs())));
        assert!(matches!(containment_factor(&flat, &ball(), &grid), Err(Error::DegenerateBody(_))));
    }
}
