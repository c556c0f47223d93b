//! Reachable sets through their support functions,
//! `H(xi) = int_0^T h_{U_t}(B(t)^T Phi(T, t)^T xi) dt`.

pub mod kernel;
pub mod quadrature;

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::convex_bodies::{BodyKind, ControlSet, SupportBody, SupportFn};
use crate::error::{check_dim, Error, Result};
use crate::linear_systems::{adjoint_transition_ode, matrix_exponential, LinearSystem, TransitionRequest};

pub use kernel::{ChebyshevTable, KernelPath, PolynomialPath};
pub use quadrature::{gauss_legendre, integrate_pieces, QuadratureOutcome};

/// Default relative tolerance of the support quadrature.
pub const DEFAULT_RTOL: f64 = 1e-9;

const KINK_SCAN: usize = 64;

/// Control set seen by the integrand, as a function of `tau in [0, 1]`.
#[derive(Clone)]
pub enum IntegrandControl {
    Constant(ControlSet),
    Varying(Arc<dyn Fn(f64) -> ControlSet + Send + Sync>),
}

/// Running statistics of the quadratures behind a body.
#[derive(Debug, Default)]
pub struct QuadStats {
    evaluations: AtomicUsize,
    max_panels: AtomicUsize,
    /// Bits of a non-negative f64; bit order matches numeric order.
    max_change: AtomicU64,
}

impl QuadStats {
    fn record(&self, out: &QuadratureOutcome) {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.max_panels.fetch_max(out.panels, Ordering::Relaxed);
        self.max_change.fetch_max(out.change.max(0.0).to_bits(), Ordering::Relaxed);
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Largest panel count per smooth piece used so far.
    pub fn max_panels(&self) -> usize {
        self.max_panels.load(Ordering::Relaxed)
    }

    /// Largest final relative change between successive refinements.
    pub fn max_change(&self) -> f64 {
        f64::from_bits(self.max_change.load(Ordering::Relaxed))
    }
}

/// `xi -> scale * int_0^1 h_{U(tau)}(W(tau) xi) dtau`, with the kinks of the
/// integrand located and used as breakpoints.
pub struct SupportIntegral {
    path: Arc<dyn KernelPath>,
    control: IntegrandControl,
    normals: Vec<Vec<f64>>,
    scale: f64,
    rtol: f64,
    stats: Arc<QuadStats>,
}

impl SupportIntegral {
    pub fn new(path: Arc<dyn KernelPath>, control: IntegrandControl, scale: f64, rtol: f64) -> Result<Self> {
        if !(rtol.is_finite() && rtol > 0.0) {
            return Err(Error::Invalid(format!("quadrature tolerance {rtol} must be positive")));
        }
        let normals = match &control {
            IntegrandControl::Constant(u) => {
                check_dim(path.rows(), u.dim())?;
                u.kink_normals()
            }
            IntegrandControl::Varying(f) => {
                check_dim(path.rows(), f(0.0).dim())?;
                Vec::new()
            }
        };
        Ok(Self { path, control, normals, scale, rtol, stats: Arc::default() })
    }

    pub fn stats(&self) -> Arc<QuadStats> {
        self.stats.clone()
    }

    fn breakpoints(&self, xi: &[f64]) -> Vec<f64> {
        let mut breaks = vec![0.0, 1.0];
        if self.normals.is_empty() {
            return breaks;
        }
        let m = self.path.rows();
        let mut w = vec![0.0; m];
        let taus: Vec<f64> = (0..=KINK_SCAN).map(|i| i as f64 / KINK_SCAN as f64).collect();
        let ws: Vec<Vec<f64>> = taus
            .iter()
            .map(|&t| {
                self.path.apply(t, xi, &mut w);
                w.clone()
            })
            .collect();
        for k in &self.normals {
            let g = |w: &[f64]| -> f64 { k.iter().zip(w).map(|(a, b)| a * b).sum() };
            let gs: Vec<f64> = ws.iter().map(|w| g(w)).collect();
            if gs.iter().all(|&v| v == 0.0) {
                continue;
            }
            for i in 0..KINK_SCAN {
                if gs[i] == 0.0 && i > 0 {
                    breaks.push(taus[i]);
                } else if gs[i] * gs[i + 1] < 0.0 {
                    let (mut lo, mut hi, mut glo) = (taus[i], taus[i + 1], gs[i]);
                    let mut buf = vec![0.0; m];
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        self.path.apply(mid, xi, &mut buf);
                        let gm = g(&buf);
                        if gm == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if (gm < 0.0) == (glo < 0.0) {
                            lo = mid;
                            glo = gm;
                        } else {
                            hi = mid;
                        }
                    }
                    breaks.push(0.5 * (lo + hi));
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::with_capacity(breaks.len());
        for b in breaks {
            if out.last().is_none_or(|&l| b - l > 1e-14) {
                out.push(b);
            }
        }
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    pub fn evaluate(&self, xi: &[f64]) -> Result<QuadratureOutcome> {
        check_dim(self.path.cols(), xi.len())?;
        let breaks = self.breakpoints(xi);
        let mut w = vec![0.0; self.path.rows()];
        let out = match &self.control {
            IntegrandControl::Constant(u) => integrate_pieces(
                |t| {
                    self.path.apply(t, xi, &mut w);
                    u.eval(&w)
                },
                &breaks,
                self.rtol,
            )?,
            IntegrandControl::Varying(f) => integrate_pieces(
                |t| {
                    self.path.apply(t, xi, &mut w);
                    f(t).eval(&w)
                },
                &breaks,
                self.rtol,
            )?,
        };
        self.stats.record(&out);
        Ok(QuadratureOutcome { value: self.scale * out.value, ..out })
    }
}

impl SupportFn for SupportIntegral {
    fn support(&self, xi: &[f64]) -> Result<f64> {
        Ok(self.evaluate(xi)?.value)
    }

    fn expensive(&self) -> bool {
        true
    }
}

/// Settings and accuracy record of a reachable-set body.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachProvenance {
    pub t_final: f64,
    pub rtol: f64,
    pub kernel_panels: usize,
    pub kernel_error: f64,
    pub evaluations: usize,
    pub max_panels: usize,
    pub max_change: f64,
}

/// `D(T)` as a support body, with its quadrature provenance.
#[derive(Debug, Clone)]
pub struct ReachableBody {
    body: SupportBody,
    t_final: f64,
    rtol: f64,
    kernel_panels: usize,
    kernel_error: f64,
    stats: Arc<QuadStats>,
}

impl ReachableBody {
    pub fn body(&self) -> &SupportBody {
        &self.body
    }

    pub fn into_body(self) -> SupportBody {
        self.body
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn provenance(&self) -> ReachProvenance {
        ReachProvenance {
            t_final: self.t_final,
            rtol: self.rtol,
            kernel_panels: self.kernel_panels,
            kernel_error: self.kernel_error,
            evaluations: self.stats.evaluations(),
            max_panels: self.stats.max_panels(),
            max_change: self.stats.max_change(),
        }
    }
}

fn check_time(t_final: f64) -> Result<()> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::InvalidTime(format!("terminal time {t_final} must be positive and finite")));
    }
    if t_final < 1e-150 {
        return Err(Error::TimeResolution(format!("terminal time {t_final:e} is below the resolvable range")));
    }
    Ok(())
}

/// Interpolation table of `W(tau) = B(tau T)^T Phi(T, tau T)^T`.
pub fn reach_kernel(sys: &LinearSystem, t_final: f64) -> Result<ChebyshevTable> {
    check_time(t_final)?;
    match sys {
        LinearSystem::Lti(s) => {
            let bt = s.b().transpose();
            let at = s.a().transpose() * t_final;
            ChebyshevTable::build(
                |taus| taus.iter().map(|&tau| Ok(&bt * matrix_exponential(&(&at * (1.0 - tau)))?)).collect(),
                1e-13,
            )
        }
        LinearSystem::Ltv(_) => ChebyshevTable::build(
            |taus| {
                let ts: Vec<f64> = taus.iter().map(|&tau| (tau * t_final).min(t_final)).collect();
                let req = TransitionRequest::new(t_final, ts.clone())?;
                let psi = adjoint_transition_ode(sys, &req)?;
                Ok(ts.iter().zip(psi).map(|(&t, p)| sys.b_at(t).transpose() * p).collect::<Vec<DMatrix<f64>>>())
            },
            1e-9,
        ),
    }
}

/// The reachable set `D(T)` of `sys` as a lazily evaluated support body.
pub fn reach_body(sys: &LinearSystem, t_final: f64, rtol: f64) -> Result<ReachableBody> {
    let table = reach_kernel(sys, t_final)?;
    let control = match sys {
        LinearSystem::Lti(s) => IntegrandControl::Constant(s.control().clone()),
        LinearSystem::Ltv(s) => match s.schedule() {
            crate::linear_systems::ControlSchedule::Constant(u) => IntegrandControl::Constant(u.clone()),
            crate::linear_systems::ControlSchedule::Varying(f) => {
                let f = f.clone();
                IntegrandControl::Varying(Arc::new(move |tau| f(tau * t_final)))
            }
        },
    };
    let (kernel_panels, kernel_error) = (table.panels(), table.max_error());
    let integral = SupportIntegral::new(Arc::new(table), control, t_final, rtol)?;
    let stats = integral.stats();
    let mut body = SupportBody::from_fn(sys.n(), BodyKind::Reachable, Arc::new(integral));
    if let Some(lti) = sys.as_lti() {
        let (rank, ok) = lti.kalman();
        if !ok {
            log::warn!("system is not controllable (rank {rank} < {}); D(T) is flat", sys.n());
            body = body.with_warning(format!("uncontrollable system (Kalman rank {rank}); reachable set is degenerate"));
        }
    }
    Ok(ReachableBody { body, t_final, rtol, kernel_panels, kernel_error, stats })
}

/// One support value `H(xi)` of `D(T)`.
pub fn reach_support(sys: &LinearSystem, t_final: f64, xi: &[f64], rtol: f64) -> Result<f64> {
    check_dim(sys.n(), xi.len())?;
    reach_body(sys, t_final, rtol)?.body().support(xi)
}

/// Closed form for the double integrator with `U = [-1, 1]`:
/// `int_0^T |xi_2 + s xi_1| ds`.
pub fn double_integrator_oracle(t_final: f64, xi: &[f64]) -> f64 {
    let (x1, x2) = (xi[0], xi[1]);
    let f = |s: f64| x2 * s + 0.5 * x1 * s * s;
    if x1 == 0.0 {
        return t_final * x2.abs();
    }
    let root = -x2 / x1;
    if root > 0.0 && root < t_final {
        (f(root) - f(0.0)).abs() + (f(t_final) - f(root)).abs()
    } else {
        (f(t_final) - f(0.0)).abs()
    }
}
