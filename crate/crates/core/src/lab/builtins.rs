//! Named test systems.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::convex_bodies::{ControlSet, Primitive};
use crate::error::{Error, Result};
use crate::linear_systems::{ControlSchedule, LinearSystem, LtiSystem, LtvSystem, TaylorData};

pub const BUILTIN_NAMES: &[&str] =
    &["double_integrator", "chain3", "damped_oscillator", "rotating_b", "two_chains_1_2", "ball_system"];

/// Declared Taylor order of the `rotating_b` arrays.
const ROTATING_ORDER: usize = 10;

fn lti(n: usize, a: &[f64], b: &[f64], u: ControlSet) -> LinearSystem {
    let m = b.len() / n;
    LtiSystem::new(DMatrix::from_row_slice(n, n, a), DMatrix::from_row_slice(n, m, b), u)
        .expect("builtin data are valid")
        .into()
}

fn rotating_b() -> Result<LinearSystem> {
    let a: crate::linear_systems::MatrixFn = Arc::new(|_| DMatrix::zeros(2, 2));
    let b: crate::linear_systems::MatrixFn = Arc::new(|t: f64| DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]));
    let mut fact = 1.0;
    let mut bk = Vec::with_capacity(ROTATING_ORDER + 1);
    for k in 0..=ROTATING_ORDER {
        if k > 0 {
            fact *= k as f64;
        }
        // d^k/dt^k (cos, sin) at 0 is (cos, sin)(k pi / 2)
        let sign = |v: f64| if v.abs() < 0.5 { 0.0 } else { v.signum() };
        let phase = k as f64 * std::f64::consts::FRAC_PI_2;
        bk.push(DMatrix::from_column_slice(2, 1, &[sign(phase.cos()) / fact, sign(phase.sin()) / fact]));
    }
    let data = TaylorData::new(vec![DMatrix::zeros(2, 2); ROTATING_ORDER + 1], bk)?;
    Ok(LtvSystem::new(2, 1, a, b, ControlSchedule::Constant(ControlSet::unit_box(1)))?.with_taylor(data)?.into())
}

/// Looks up a builtin system by name.
pub fn builtin_system(name: &str) -> Result<LinearSystem> {
    match name {
        "double_integrator" => Ok(lti(2, &[0.0, 1.0, 0.0, 0.0], &[0.0, 1.0], ControlSet::unit_box(1))),
        "chain3" => Ok(lti(3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0], ControlSet::unit_box(1))),
        "damped_oscillator" => Ok(lti(2, &[0.0, 1.0, -1.0, -0.3], &[0.0, 1.0], ControlSet::unit_box(1))),
        "rotating_b" => rotating_b(),
        "two_chains_1_2" => Ok(lti(
            3,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            ControlSet::unit_box(2),
        )),
        "ball_system" => Ok(lti(
            2,
            &[0.0; 4],
            &[1.0, 0.0, 0.0, 1.0],
            ControlSet::new(Primitive::Ball { dim: 2, radius: 1.0 })?,
        )),
        _ => Err(Error::UnknownBuiltin { name: name.to_string(), available: BUILTIN_NAMES.join(", ") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_construct() {
        for name in BUILTIN_NAMES {
            builtin_system(name).unwrap();
        }
    }

    #[test]
    fn unknown_name_lists_available() {
        let err = builtin_system("pendulum").unwrap_err().to_string();
        assert!(err.contains("double_integrator") && err.contains("rotating_b"));
    }

    #[test]
    fn rotating_b_taylor_matches_evaluators() {
        let LinearSystem::Ltv(s) = builtin_system("rotating_b").unwrap() else { panic!("expected LTV") };
        assert!(s.check_taylor().unwrap() < 1e-6);
        let d = s.taylor_data().unwrap();
        assert_eq!(d.b[2].as_slice(), &[-0.5, 0.0]);
        assert_eq!(d.b[3].as_slice(), &[0.0, -1.0 / 6.0]);
    }
}
