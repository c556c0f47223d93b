use std::borrow::Cow;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use super::kalman::kalman_check;
use super::taylor::{finite_difference_taylor, TaylorData};
use crate::convex_bodies::ControlSet;
use crate::error::{Error, Result};
use crate::linalg;

/// Time-dependent matrix data `t -> M(t)`.
pub type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// Time-invariant system `x' = A x + B u`, `u in U`.
#[derive(Clone)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    u: ControlSet,
    kalman: Arc<OnceLock<(usize, bool)>>,
}

impl fmt::Debug for LtiSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LtiSystem").field("a", &self.a).field("b", &self.b).field("u", &self.u).finish()
    }
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, u: ControlSet) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Invalid(format!("A must be square, got {}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.nrows() });
        }
        if u.dim() != b.ncols() {
            return Err(Error::DimensionMismatch { expected: b.ncols(), got: u.dim() });
        }
        if !linalg::all_finite(&a) || !linalg::all_finite(&b) {
            return Err(Error::NonFinite("system matrices".into()));
        }
        Ok(Self { a, b, u, kalman: Arc::new(OnceLock::new()) })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn control(&self) -> &ControlSet {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Cached Kalman rank and controllability flag.
    pub fn kalman(&self) -> (usize, bool) {
        *self.kalman.get_or_init(|| kalman_check(&self.a, &self.b).expect("dimensions checked at construction"))
    }

    pub fn with_control(&self, u: ControlSet) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), u)
    }
}

/// Control set as a function of time.
#[derive(Clone)]
pub enum ControlSchedule {
    Constant(ControlSet),
    Varying(Arc<dyn Fn(f64) -> ControlSet + Send + Sync>),
}

impl ControlSchedule {
    pub fn at(&self, t: f64) -> Cow<'_, ControlSet> {
        match self {
            ControlSchedule::Constant(u) => Cow::Borrowed(u),
            ControlSchedule::Varying(f) => Cow::Owned(f(t)),
        }
    }
}

/// Time-varying system with smooth data and optional Taylor arrays at `t = 0`.
#[derive(Clone)]
pub struct LtvSystem {
    n: usize,
    m: usize,
    a: MatrixFn,
    b: MatrixFn,
    u: ControlSchedule,
    taylor: Option<TaylorData>,
}

impl fmt::Debug for LtvSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LtvSystem")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("taylor_order", &self.taylor.as_ref().map(TaylorData::order))
            .finish_non_exhaustive()
    }
}

impl LtvSystem {
    pub fn new(n: usize, m: usize, a: MatrixFn, b: MatrixFn, u: ControlSchedule) -> Result<Self> {
        let (a0, b0) = (a(0.0), b(0.0));
        if a0.shape() != (n, n) {
            return Err(Error::Invalid(format!("A(0) has shape {:?}, expected ({n}, {n})", a0.shape())));
        }
        if b0.shape() != (n, m) {
            return Err(Error::Invalid(format!("B(0) has shape {:?}, expected ({n}, {m})", b0.shape())));
        }
        if u.at(0.0).dim() != m {
            return Err(Error::DimensionMismatch { expected: m, got: u.at(0.0).dim() });
        }
        Ok(Self { n, m, a, b, u, taylor: None })
    }

    /// System whose data are the given polynomials `sum_k M_k t^k`.
    pub fn from_taylor(a: Vec<DMatrix<f64>>, b: Vec<DMatrix<f64>>, u: ControlSet) -> Result<Self> {
        let mut data = TaylorData::new(a, b)?;
        data.polynomial = true;
        let (n, m) = (data.n(), data.m());
        let (pa, pb) = (data.a.clone(), data.b.clone());
        let eval = |coeffs: Vec<DMatrix<f64>>| -> MatrixFn {
            Arc::new(move |t: f64| {
                let mut acc = coeffs.last().expect("nonempty").clone();
                for c in coeffs.iter().rev().skip(1) {
                    acc = acc * t + c;
                }
                acc
            })
        };
        let mut sys = Self::new(n, m, eval(pa), eval(pb), ControlSchedule::Constant(u))?;
        sys.taylor = Some(data);
        Ok(sys)
    }

    pub fn with_taylor(mut self, data: TaylorData) -> Result<Self> {
        if data.n() != self.n || data.m() != self.m {
            return Err(Error::Invalid("Taylor arrays have the wrong shape".into()));
        }
        self.taylor = Some(data);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a_at(&self, t: f64) -> DMatrix<f64> {
        (self.a)(t)
    }

    pub fn b_at(&self, t: f64) -> DMatrix<f64> {
        (self.b)(t)
    }

    pub fn schedule(&self) -> &ControlSchedule {
        &self.u
    }

    pub fn taylor_data(&self) -> Option<&TaylorData> {
        self.taylor.as_ref()
    }

    /// Compares declared Taylor arrays with finite differences of the
    /// evaluators at `t = 0` (orders up to 4, relative tolerance 1e-4).
    /// Returns the largest relative discrepancy.
    pub fn check_taylor(&self) -> Result<f64> {
        let data = self.taylor.as_ref().ok_or_else(|| Error::MissingTaylor("no Taylor arrays declared".into()))?;
        let order = data.order().min(4);
        let (fa, fb) = (finite_difference_taylor(&self.a, order), finite_difference_taylor(&self.b, order));
        let scale = linalg::max_abs(&data.a[0]).max(linalg::max_abs(&data.b[0])).max(1.0);
        let mut worst = 0.0f64;
        for k in 0..=order {
            for (declared, fd) in [(&data.a[k], &fa[k]), (&data.b[k], &fb[k])] {
                let rel = linalg::max_abs(&(declared - fd)) / scale;
                worst = worst.max(rel);
            }
        }
        if worst > 1e-4 {
            return Err(Error::Invalid(format!("Taylor arrays disagree with finite differences (relative {worst:e})")));
        }
        Ok(worst)
    }
}

/// Either kind of linear control system.
#[derive(Debug, Clone)]
pub enum LinearSystem {
    Lti(LtiSystem),
    Ltv(LtvSystem),
}

impl From<LtiSystem> for LinearSystem {
    fn from(s: LtiSystem) -> Self {
        LinearSystem::Lti(s)
    }
}

impl From<LtvSystem> for LinearSystem {
    fn from(s: LtvSystem) -> Self {
        LinearSystem::Ltv(s)
    }
}

impl LinearSystem {
    pub fn n(&self) -> usize {
        match self {
            LinearSystem::Lti(s) => s.n(),
            LinearSystem::Ltv(s) => s.n(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            LinearSystem::Lti(s) => s.m(),
            LinearSystem::Ltv(s) => s.m(),
        }
    }

    pub fn a_at(&self, t: f64) -> Cow<'_, DMatrix<f64>> {
        match self {
            LinearSystem::Lti(s) => Cow::Borrowed(s.a()),
            LinearSystem::Ltv(s) => Cow::Owned(s.a_at(t)),
        }
    }

    pub fn b_at(&self, t: f64) -> Cow<'_, DMatrix<f64>> {
        match self {
            LinearSystem::Lti(s) => Cow::Borrowed(s.b()),
            LinearSystem::Ltv(s) => Cow::Owned(s.b_at(t)),
        }
    }

    pub fn control_at(&self, t: f64) -> Cow<'_, ControlSet> {
        match self {
            LinearSystem::Lti(s) => Cow::Borrowed(s.control()),
            LinearSystem::Ltv(s) => s.schedule().at(t),
        }
    }

    pub fn constant_control(&self) -> Option<&ControlSet> {
        match self {
            LinearSystem::Lti(s) => Some(s.control()),
            LinearSystem::Ltv(s) => match s.schedule() {
                ControlSchedule::Constant(u) => Some(u),
                ControlSchedule::Varying(_) => None,
            },
        }
    }

    pub fn as_lti(&self) -> Option<&LtiSystem> {
        match self {
            LinearSystem::Lti(s) => Some(s),
            LinearSystem::Ltv(_) => None,
        }
    }

    /// Taylor arrays of `A` and `B` at `t = 0` up to `order`, with any
    /// warnings raised by a finite-difference fallback.
    pub fn taylor(&self, order: usize) -> (TaylorData, Vec<String>) {
        match self {
            LinearSystem::Lti(s) => {
                let (n, m) = (s.n(), s.m());
                let mut a = vec![DMatrix::zeros(n, n); order + 1];
                let mut b = vec![DMatrix::zeros(n, m); order + 1];
                a[0] = s.a().clone();
                b[0] = s.b().clone();
                (TaylorData { a, b, polynomial: true }, Vec::new())
            }
            LinearSystem::Ltv(s) => match s.taylor_data() {
                Some(d) if d.order() >= order => (d.truncated(order), Vec::new()),
                Some(d) if d.is_polynomial() => (d.padded(order), Vec::new()),
                _ => {
                    let msg = format!(
                        "Taylor arrays of order {order} unavailable; using finite differences of the evaluators (noise risk)"
                    );
                    log::warn!("{msg}");
                    let data = TaylorData {
                        a: finite_difference_taylor(&s.a, order),
                        b: finite_difference_taylor(&s.b, order),
                        polynomial: false,
                    };
                    (data, vec![msg])
                }
            },
        }
    }
}
