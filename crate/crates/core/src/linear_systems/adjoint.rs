//! Adjoint transition `Phi(T, t)^T` along a set of node times.

use nalgebra::{DMatrix, DVector};

use super::expm::matrix_exponential;
use super::system::LinearSystem;
use crate::error::{Error, Result};

/// Terminal time and the node times at which `Phi(T, t)^T` is wanted.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRequest {
    t_final: f64,
    nodes: Vec<f64>,
}

impl TransitionRequest {
    pub fn new(t_final: f64, nodes: Vec<f64>) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidTime(format!("terminal time {t_final} must be positive")));
        }
        if nodes.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Invalid("transition nodes must be sorted".into()));
        }
        if nodes.iter().any(|&t| !(0.0..=t_final).contains(&t)) {
            return Err(Error::Invalid(format!("transition nodes must lie in [0, {t_final}]")));
        }
        Ok(Self { t_final, nodes })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

const ODE_RTOL: f64 = 1e-10;

fn rk4_sweep(sys: &LinearSystem, req: &TransitionRequest, steps_per_horizon: usize) -> Vec<DMatrix<f64>> {
    let n = sys.n();
    let t_final = req.t_final;
    let h_max = t_final / steps_per_horizon as f64;
    let rhs = |t: f64, psi: &DMatrix<f64>| -> DMatrix<f64> { -(sys.a_at(t).transpose() * psi) };
    let mut psi = DMatrix::identity(n, n);
    let mut t = t_final;
    let mut out = vec![DMatrix::zeros(n, n); req.nodes.len()];
    for (idx, &target) in req.nodes.iter().enumerate().rev() {
        let span = t - target;
        if span > 0.0 {
            let steps = (span / h_max).ceil().max(1.0) as usize;
            let h = -span / steps as f64;
            for _ in 0..steps {
                let k1 = rhs(t, &psi);
                let k2 = rhs(t + h / 2.0, &(&psi + &k1 * (h / 2.0)));
                let k3 = rhs(t + h / 2.0, &(&psi + &k2 * (h / 2.0)));
                let k4 = rhs(t + h, &(&psi + &k3 * h));
                psi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                t += h;
            }
            t = target;
        }
        out[idx] = psi.clone();
    }
    out
}

/// `Phi(T, t_j)^T` by a fixed-step RK4 sweep of `psi' = -A(t)^T psi`
/// backward from `psi(T) = I`; the step count doubles until halving the step
/// changes the result by less than 1e-10 relative.
pub fn adjoint_transition_ode(sys: &LinearSystem, req: &TransitionRequest) -> Result<Vec<DMatrix<f64>>> {
    if req.t_final / (1u64 << 20) as f64 <= f64::MIN_POSITIVE * 1e3 {
        return Err(Error::TimeResolution(format!("terminal time {:e} underflows the step size", req.t_final)));
    }
    let mut steps = 16usize;
    let mut prev = rk4_sweep(sys, req, steps);
    loop {
        steps *= 2;
        let next = rk4_sweep(sys, req, steps);
        let scale = next.iter().map(crate::linalg::max_abs).fold(1.0, f64::max);
        let change = prev.iter().zip(&next).map(|(a, b)| crate::linalg::max_abs(&(a - b))).fold(0.0, f64::max);
        if change <= ODE_RTOL * scale {
            return Ok(next);
        }
        if steps >= 1 << 20 {
            return Err(Error::TimeResolution(format!("RK4 did not settle (change {change:e})")));
        }
        prev = next;
    }
}

/// `Phi(T, t_j)^T` at every node; closed form `exp(A^T (T - t))` for
/// time-invariant systems.
pub fn adjoint_transition(sys: &LinearSystem, req: &TransitionRequest) -> Result<Vec<DMatrix<f64>>> {
    match sys {
        LinearSystem::Lti(s) => {
            let at = s.a().transpose();
            req.nodes.iter().map(|&t| matrix_exponential(&(&at * (req.t_final - t)))).collect()
        }
        LinearSystem::Ltv(_) => adjoint_transition_ode(sys, req),
    }
}

/// `eta(t_j) = Phi(T, t_j)^T xi`.
pub fn adjoint_state(sys: &LinearSystem, req: &TransitionRequest, xi: &[f64]) -> Result<Vec<DVector<f64>>> {
    crate::error::check_dim(sys.n(), xi.len())?;
    let xi = DVector::from_column_slice(xi);
    Ok(adjoint_transition(sys, req)?.into_iter().map(|m| m * &xi).collect())
}

/// `Phi(T, 0)`.
pub fn state_transition(sys: &LinearSystem, t_final: f64) -> Result<DMatrix<f64>> {
    let req = TransitionRequest::new(t_final, vec![0.0])?;
    Ok(adjoint_transition(sys, &req)?.remove(0).transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_bodies::ControlSet;
    use crate::linear_systems::{ControlSchedule, LtiSystem, LtvSystem};
    use std::sync::Arc;

    fn double_integrator() -> LinearSystem {
        LtiSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            ControlSet::unit_box(1),
        )
        .unwrap()
        .into()
    }

    #[test]
    fn zero_drift_keeps_xi() {
        let sys: LinearSystem = LtiSystem::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2), ControlSet::unit_box(2)).unwrap().into();
        let req = TransitionRequest::new(1.0, vec![0.0, 0.5, 1.0]).unwrap();
        for eta in adjoint_state(&sys, &req, &[0.3, -2.0]).unwrap() {
            assert_eq!(eta.as_slice(), &[0.3, -2.0]);
        }
        let ltv: LinearSystem = LtvSystem::new(
            2,
            1,
            Arc::new(|_| DMatrix::zeros(2, 2)),
            Arc::new(|t: f64| DMatrix::from_row_slice(2, 1, &[t.cos(), t.sin()])),
            ControlSchedule::Constant(ControlSet::unit_box(1)),
        )
        .unwrap()
        .into();
        for eta in adjoint_state(&ltv, &req, &[0.3, -2.0]).unwrap() {
            assert!((eta - DVector::from_row_slice(&[0.3, -2.0])).amax() < 1e-15);
        }
    }

    #[test]
    fn double_integrator_closed_form() {
        let req = TransitionRequest::new(1.0, vec![0.0]).unwrap();
        let eta = adjoint_state(&double_integrator(), &req, &[1.0, 0.0]).unwrap();
        assert!((eta[0].clone() - DVector::from_row_slice(&[1.0, 1.0])).amax() < 1e-15);
    }

    #[test]
    fn ode_matches_closed_form() {
        let sys: LinearSystem = LtiSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.3]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            ControlSet::unit_box(1),
        )
        .unwrap()
        .into();
        let req = TransitionRequest::new(2.0, vec![0.0, 0.3, 1.1, 2.0]).unwrap();
        let exact = adjoint_transition(&sys, &req).unwrap();
        let ode = adjoint_transition_ode(&sys, &req).unwrap();
        for (e, o) in exact.iter().zip(&ode) {
            assert!((e - o).amax() < 1e-9);
        }
    }

    #[test]
    fn invalid_requests() {
        assert!(matches!(TransitionRequest::new(0.0, vec![]), Err(Error::InvalidTime(_))));
        assert!(TransitionRequest::new(1.0, vec![0.5, 0.2]).is_err());
        assert!(TransitionRequest::new(1.0, vec![1.5]).is_err());
    }
}
