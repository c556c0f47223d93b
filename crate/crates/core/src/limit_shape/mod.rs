//! Small-time limit shapes: the filtration route for general systems, the
//! Brunovsky route for time-invariant ones, and the normalized distance of
//! `D(T)` to the limit.

pub mod filtration;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::brunovsky::{brunovsky_limit_body, brunovsky_normalizer, brunovsky_transform, BrunovskyForm};
use crate::convex_bodies::{
    linear_image, shape_distance, BodyKind, ControlSet, DirectionGrid, InitOrder, LinearMap, ShapeOptions,
    ShapeResult, SupportBody,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::linear_systems::{state_transition, LinearSystem};
use crate::reachable::{reach_body, IntegrandControl, PolynomialPath, SupportIntegral};

pub use filtration::{
    default_k_max, delta_normalizer, filtration, genericity_check, graded_splitting, reduce_to_driftless,
    DriftlessReduction, Filtration, GradedSplitting, NormalizerDelta,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Brunovsky,
    Filtration,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Brunovsky => "brunovsky",
            Route::Filtration => "filtration",
        }
    }
}

/// Reduction, filtration and splitting of a system at `t = 0`.
#[derive(Debug, Clone)]
pub struct FiltrationAnalysis {
    pub reduction: DriftlessReduction,
    pub filtration: Filtration,
    pub splitting: GradedSplitting,
}

/// Runs the filtration pipeline with order bound `k_max` (default:
/// [`default_k_max`]); fails with the dimension sequence when the
/// filtration does not reach zero.
pub fn analyze(sys: &LinearSystem, k_max: Option<usize>) -> Result<FiltrationAnalysis> {
    let k_max = k_max.unwrap_or_else(|| default_k_max(sys));
    let reduction = reduce_to_driftless(sys, k_max)?;
    let filt = filtration(&reduction)?;
    if !genericity_check(&filt, k_max) {
        return Err(Error::Genericity { dims: filt.dims });
    }
    let splitting = graded_splitting(&filt, &reduction)?;
    Ok(FiltrationAnalysis { reduction, filtration: filt, splitting })
}

/// `H(xi) = int_0^1 h_{U0}(sum_k tau^k B~_k^T Pi_k xi) dtau`, checked for
/// degeneracy on `grid`.
pub fn limit_body(
    split: &GradedSplitting,
    red: &DriftlessReduction,
    u0: &ControlSet,
    grid: &DirectionGrid,
    rtol: f64,
) -> Result<SupportBody> {
    let top = *split.jumps.last().ok_or_else(|| Error::SplittingFailure("no graded pieces".into()))?;
    if top > red.order() {
        return Err(Error::MissingTaylor(format!("jump at order {top} beyond the reduction order {}", red.order())));
    }
    let (n, m) = (red.n(), red.m());
    let mut coeffs = vec![DMatrix::zeros(m, n); top + 1];
    for (&k, p) in split.jumps.iter().zip(&split.projectors) {
        coeffs[k] = red.b_tilde[k].transpose() * p;
    }
    let integral = SupportIntegral::new(
        Arc::new(PolynomialPath::new(coeffs)?),
        IntegrandControl::Constant(u0.clone()),
        1.0,
        rtol,
    )?;
    let body = SupportBody::from_fn(n, BodyKind::Limit, Arc::new(integral));
    body.check_nondegenerate(grid).map_err(|e| match e {
        Error::DegenerateBody(msg) => Error::DegenerateLimitBody(msg),
        other => other,
    })?;
    Ok(body)
}

/// The map carrying `D(T)` towards the limit body of a route.
#[derive(Debug, Clone)]
pub enum Normalizer {
    /// `delta(T) P`.
    Brunovsky(BrunovskyForm),
    /// `Delta(T) Phi(T, 0)^{-1}`.
    Filtration(GradedSplitting),
}

impl Normalizer {
    pub fn map(&self, sys: &LinearSystem, t_final: f64) -> Result<LinearMap> {
        match self {
            Normalizer::Brunovsky(form) => brunovsky_normalizer(form, t_final),
            Normalizer::Filtration(split) => {
                let delta = delta_normalizer(split, t_final)?;
                let phi_inv = linalg::invert(&state_transition(sys, t_final)?, "state transition")?;
                LinearMap::new(delta.delta * phi_inv)
            }
        }
    }
}

/// A limit body together with the normalizer of its route.
#[derive(Debug, Clone)]
pub struct LimitShape {
    pub route: Route,
    pub body: SupportBody,
    pub normalizer: Normalizer,
    /// Filtration dimensions (filtration route only).
    pub dims: Option<Vec<usize>>,
    pub warnings: Vec<String>,
}

/// Computes the limit body of `sys` along `route`.
pub fn limit_shape(
    sys: &LinearSystem,
    route: Route,
    grid: &DirectionGrid,
    rtol: f64,
    k_max: Option<usize>,
) -> Result<LimitShape> {
    match route {
        Route::Brunovsky => {
            let lti = sys
                .as_lti()
                .ok_or_else(|| Error::Invalid("the Brunovsky route needs a time-invariant system".into()))?;
            let form = brunovsky_transform(lti.a(), lti.b())?;
            let body = brunovsky_limit_body(lti, rtol)?;
            body.check_nondegenerate(grid).map_err(|e| match e {
                Error::DegenerateBody(msg) => Error::DegenerateLimitBody(msg),
                other => other,
            })?;
            Ok(LimitShape { route, body, normalizer: Normalizer::Brunovsky(form), dims: None, warnings: Vec::new() })
        }
        Route::Filtration => {
            let an = analyze(sys, k_max)?;
            let u0 = sys.control_at(0.0).into_owned();
            let body = limit_body(&an.splitting, &an.reduction, &u0, grid, rtol)?;
            Ok(LimitShape {
                route,
                body,
                dims: Some(an.filtration.dims.clone()),
                warnings: an.reduction.warnings.clone(),
                normalizer: Normalizer::Filtration(an.splitting),
            })
        }
    }
}

/// `D(T)` mapped by the route's normalizer.
pub fn normalized_reach_body(sys: &LinearSystem, t_final: f64, limit: &LimitShape, rtol: f64) -> Result<SupportBody> {
    let reach = reach_body(sys, t_final, rtol)?;
    let map = limit.normalizer.map(sys, t_final)?;
    Ok(linear_image(reach.body(), &map)?.with_kind(BodyKind::Normalized))
}

/// Shape distance between the normalized `D(T)` and the limit body, searched
/// from the identity first since the normalizer already aligns the bodies.
pub fn shape_convergence_point(
    sys: &LinearSystem,
    t_final: f64,
    limit: &LimitShape,
    grid: &DirectionGrid,
    opts: &ShapeOptions,
    rtol: f64,
) -> Result<ShapeResult> {
    let normalized = normalized_reach_body(sys, t_final, limit, rtol)?;
    let opts = ShapeOptions { init_order: InitOrder::IdentityFirst, ..opts.clone() };
    shape_distance(&normalized, &limit.body, grid, &opts)
}
