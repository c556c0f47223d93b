use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::DirectionGrid;
use super::record::{BodyRecord, ShapeSpec};
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Anything that can report a support value `h(xi)`.
pub trait SupportFn: Send + Sync {
    fn support(&self, xi: &[f64]) -> Result<f64>;

    /// Whether one evaluation is costly (quadrature-backed).
    fn expensive(&self) -> bool {
        false
    }
}

impl<F> SupportFn for F
where
    F: Fn(&[f64]) -> Result<f64> + Send + Sync,
{
    fn support(&self, xi: &[f64]) -> Result<f64> {
        self(xi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Primitive,
    LinearImage,
    Reachable,
    Limit,
    Normalized,
}

/// A real square matrix acting on the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap(DMatrix<f64>);

impl LinearMap {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Invalid(format!("linear map must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        if !linalg::all_finite(&m) {
            return Err(Error::NonFinite("linear map entries".into()));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(linalg::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn scalar(n: usize, c: f64) -> Self {
        Self(DMatrix::identity(n, n) * c)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    pub fn inverse(&self) -> Result<Self> {
        linalg::invert(&self.0, "linear map").map(Self)
    }

    /// `self * other`, i.e. apply `other` first.
    pub fn compose(&self, other: &LinearMap) -> LinearMap {
        Self(&self.0 * &other.0)
    }
}

impl From<LinearMap> for DMatrix<f64> {
    fn from(m: LinearMap) -> Self {
        m.0
    }
}

/// Relative support level below which a body counts as flat.
pub const DEGENERACY_RTOL: f64 = 1e-12;

type SampleCache = Mutex<HashMap<(usize, usize), Arc<Vec<f64>>>>;

/// A centrally symmetric convex body given by its support function.
///
/// Bodies are immutable; grid samples are memoized per grid so repeated metric
/// computations on the same grid evaluate each direction once.
#[derive(Clone)]
pub struct SupportBody {
    dim: usize,
    kind: BodyKind,
    eval: Arc<dyn SupportFn>,
    cache: Arc<SampleCache>,
    warnings: Vec<String>,
    record: Option<BodyRecord>,
}

impl fmt::Debug for SupportBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SupportBody")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("warnings", &self.warnings)
            .finish_non_exhaustive()
    }
}

impl SupportBody {
    pub fn from_fn(dim: usize, kind: BodyKind, eval: Arc<dyn SupportFn>) -> Self {
        Self {
            dim,
            kind,
            eval,
            cache: Arc::new(Mutex::new(HashMap::new())),
            warnings: Vec::new(),
            record: None,
        }
    }

    pub fn with_record(mut self, record: BodyRecord) -> Self {
        self.record = Some(record);
        self
    }

    pub fn with_warning(mut self, w: impl Into<String>) -> Self {
        self.warnings.push(w.into());
        self
    }

    pub fn with_kind(mut self, kind: BodyKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> BodyKind {
        self.kind
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn record(&self) -> Option<&BodyRecord> {
        self.record.as_ref()
    }

    pub fn is_expensive(&self) -> bool {
        self.eval.expensive()
    }

    /// `h(xi)` with dimension and finiteness checks.
    pub fn support(&self, xi: &[f64]) -> Result<f64> {
        check_dim(self.dim, xi.len())?;
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("direction".into()));
        }
        self.eval.support(xi)
    }

    /// Support values at every grid direction, memoized per grid.
    pub fn sample(&self, grid: &DirectionGrid) -> Result<Arc<Vec<f64>>> {
        check_dim(self.dim, grid.dim())?;
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(&grid.key()) {
            return Ok(hit.clone());
        }
        let values: Vec<f64> = if self.is_expensive() {
            grid.iter().collect::<Vec<_>>().par_iter().map(|d| self.eval.support(d)).collect::<Result<_>>()?
        } else {
            grid.iter().map(|d| self.eval.support(d)).collect::<Result<_>>()?
        };
        let values = Arc::new(values);
        self.cache.lock().expect("cache poisoned").insert(grid.key(), values.clone());
        Ok(values)
    }

    /// Support values at arbitrary directions (parallel when expensive).
    pub fn support_many(&self, dirs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if self.is_expensive() {
            dirs.par_iter().map(|d| self.support(d)).collect()
        } else {
            dirs.iter().map(|d| self.support(d)).collect()
        }
    }

    /// Rejects bodies whose support vanishes (relative to its largest value,
    /// at 1e-12) in some grid direction.
    pub fn check_nondegenerate(&self, grid: &DirectionGrid) -> Result<Arc<Vec<f64>>> {
        let h = self.sample(grid)?;
        let floor = DEGENERACY_RTOL * h.iter().copied().fold(0.0, f64::max);
        if let Some(k) = h.iter().position(|&v| !(v > floor)) {
            return Err(Error::DegenerateBody(format!(
                "support value {} at grid direction {:?}",
                h[k],
                grid.direction(k)
            )));
        }
        Ok(h)
    }

    /// Grid samples as CSV text, one row `xi..., h` per direction.
    pub fn samples_csv(&self, grid: &DirectionGrid) -> Result<String> {
        let h = self.sample(grid)?;
        let mut out = String::new();
        let header: Vec<String> = (0..self.dim).map(|i| format!("xi{i}")).chain(["h".to_string()]).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (d, v) in grid.iter().zip(h.iter()) {
            let row: Vec<String> = d.iter().chain(std::iter::once(v)).map(|x| x.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// Constructor-level description of a primitive body.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// `h(xi) = sum a_i |xi_i|`
    Box { half_widths: Vec<f64> },
    /// `h(xi) = r |xi|`
    Ball { dim: usize, radius: f64 },
    /// `h(xi) = sqrt(xi^T Q xi)`
    Ellipsoid { q: DMatrix<f64> },
    /// `h(xi) = max_j |<v_j, xi>|`
    Polytope { vertices: Vec<Vec<f64>> },
    /// `h(xi) = sum_j |<g_j, xi>|`
    Zonotope { generators: Vec<Vec<f64>> },
}

fn spans(vectors: &[Vec<f64>], dim: usize) -> Result<bool> {
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: vectors.iter().map(Vec::len).find(|&l| l != dim).unwrap_or(0) });
    }
    if vectors.is_empty() {
        return Ok(false);
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]);
    Ok(linalg::numerical_rank(&m) == dim)
}

impl Primitive {
    pub fn dim(&self) -> usize {
        match self {
            Primitive::Box { half_widths } => half_widths.len(),
            Primitive::Ball { dim, .. } => *dim,
            Primitive::Ellipsoid { q } => q.nrows(),
            Primitive::Polytope { vertices } => vertices.first().map_or(0, Vec::len),
            Primitive::Zonotope { generators } => generators.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::DegenerateBody("zero-dimensional body".into()));
        }
        match self {
            Primitive::Box { half_widths } => {
                if half_widths.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(Error::DegenerateBody("box half-widths must be positive".into()));
                }
            }
            Primitive::Ball { radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::DegenerateBody(format!("ball radius {radius} must be positive")));
                }
            }
            Primitive::Ellipsoid { q } => {
                if q.nrows() != q.ncols() || !linalg::all_finite(q) {
                    return Err(Error::DegenerateBody("ellipsoid form must be a finite square matrix".into()));
                }
                let asym = (q - q.transpose()).amax();
                if asym > 1e-12 * q.amax().max(1.0) || q.clone().cholesky().is_none() {
                    return Err(Error::DegenerateBody("ellipsoid form is not symmetric positive definite".into()));
                }
            }
            Primitive::Polytope { vertices: vs } | Primitive::Zonotope { generators: vs } => {
                if vs.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("polytope/zonotope data".into()));
                }
                if !spans(vs, dim)? {
                    return Err(Error::DegenerateBody("vectors do not span the space".into()));
                }
            }
        }
        Ok(())
    }

    /// Direct evaluation; callers guarantee `xi.len() == self.dim()`.
    pub fn eval(&self, xi: &[f64]) -> f64 {
        match self {
            Primitive::Box { half_widths } => half_widths.iter().zip(xi).map(|(a, x)| a * x.abs()).sum(),
            Primitive::Ball { radius, .. } => radius * xi.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Primitive::Ellipsoid { q } => {
                let n = q.nrows();
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += xi[i] * q[(i, j)] * xi[j];
                    }
                }
                s.max(0.0).sqrt()
            }
            Primitive::Polytope { vertices } => vertices.iter().map(|v| dot(v, xi).abs()).fold(0.0, f64::max),
            Primitive::Zonotope { generators } => generators.iter().map(|g| dot(g, xi).abs()).sum(),
        }
    }

    /// Linear functionals whose sign changes mark the kinks of `h`.
    pub fn kink_normals(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        match self {
            Primitive::Box { .. } => (0..dim).map(|i| unit(dim, i)).collect(),
            Primitive::Ball { .. } | Primitive::Ellipsoid { .. } => {
                if dim == 1 {
                    vec![vec![1.0]]
                } else {
                    Vec::new()
                }
            }
            Primitive::Zonotope { generators } => generators.clone(),
            Primitive::Polytope { vertices } => {
                let mut out = vertices.clone();
                for (i, a) in vertices.iter().enumerate() {
                    for b in &vertices[i + 1..] {
                        out.push(a.iter().zip(b).map(|(x, y)| x - y).collect());
                        out.push(a.iter().zip(b).map(|(x, y)| x + y).collect());
                    }
                }
                out
            }
        }
    }

    pub fn to_spec(&self) -> ShapeSpec {
        match self {
            Primitive::Box { half_widths } => ShapeSpec::Box { half_widths: half_widths.clone() },
            Primitive::Ball { radius, .. } => ShapeSpec::Ball { radius: *radius },
            Primitive::Ellipsoid { q } => ShapeSpec::Ellipsoid { q: linalg::to_rows(q) },
            Primitive::Polytope { vertices } => ShapeSpec::Polytope { vertices: vertices.clone() },
            Primitive::Zonotope { generators } => ShapeSpec::Zonotope { generators: generators.clone() },
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

struct PrimitiveFn(Primitive);

impl SupportFn for PrimitiveFn {
    fn support(&self, xi: &[f64]) -> Result<f64> {
        Ok(self.0.eval(xi))
    }
}

/// Validates `p` and wraps it as a body.
pub fn make_primitive(p: Primitive) -> Result<SupportBody> {
    p.validate()?;
    let dim = p.dim();
    let record = BodyRecord { shape: p.to_spec(), dimension: dim, samples: None };
    Ok(SupportBody::from_fn(dim, BodyKind::Primitive, Arc::new(PrimitiveFn(p))).with_record(record))
}

/// Evaluates `h(xi)`; exact for primitives, quadrature-accurate otherwise.
pub fn support_eval(body: &SupportBody, xi: &[f64]) -> Result<f64> {
    body.support(xi)
}

struct ImageFn {
    inner: SupportBody,
    /// `M^T`, applied to the direction.
    mt: DMatrix<f64>,
}

impl SupportFn for ImageFn {
    fn support(&self, xi: &[f64]) -> Result<f64> {
        let v = &self.mt * DVector::from_column_slice(xi);
        self.inner.eval.support(v.as_slice())
    }

    fn expensive(&self) -> bool {
        self.inner.is_expensive()
    }
}

/// Support function of `M * body`: `xi -> h(M^T xi)`.
pub fn linear_image(body: &SupportBody, m: &LinearMap) -> Result<SupportBody> {
    check_dim(body.dim(), m.dim())?;
    let kind = match body.kind() {
        BodyKind::Primitive | BodyKind::LinearImage => BodyKind::LinearImage,
        k => k,
    };
    let mut out = SupportBody::from_fn(
        body.dim(),
        kind,
        Arc::new(ImageFn { inner: body.clone(), mt: m.matrix().transpose() }),
    );
    out.warnings = body.warnings.clone();
    let det = m.det();
    if det.abs() < 1e-12 {
        out.warnings.push(format!("linear image under a near-singular map (|det| = {:e}); result is not a body", det.abs()));
    }
    if let Some(rec) = body.record() {
        out.record = Some(BodyRecord {
            shape: ShapeSpec::LinearImage { map: linalg::to_rows(m.matrix()), body: Box::new(rec.clone()) },
            dimension: body.dim(),
            samples: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(dim: usize, r: f64) -> SupportBody {
        make_primitive(Primitive::Ball { dim, radius: r }).unwrap()
    }

    #[test]
    fn primitive_examples() {
        assert_eq!(ball(2, 1.0).support(&[3.0, 4.0]).unwrap(), 5.0);
        let bx = make_primitive(Primitive::Box { half_widths: vec![1.0, 1.0] }).unwrap();
        assert_eq!(bx.support(&[1.0, 1.0]).unwrap(), 2.0);
        let z = make_primitive(Primitive::Zonotope { generators: vec![vec![1.0, 0.0], vec![0.0, 2.0]] }).unwrap();
        assert_eq!(z.support(&[1.0, 1.0]).unwrap(), 3.0);
    }

    #[test]
    fn support_eval_examples() {
        assert_eq!(support_eval(&ball(2, 1.0), &[0.0, 0.0]).unwrap(), 0.0);
        let bx = make_primitive(Primitive::Box { half_widths: vec![2.0, 3.0] }).unwrap();
        assert_eq!(support_eval(&bx, &[1.0, 0.0]).unwrap(), 2.0);
        let e = make_primitive(Primitive::Ellipsoid { q: DMatrix::identity(2, 2) }).unwrap();
        assert_eq!(support_eval(&e, &[0.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(support_eval(&e, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn degenerate_parameters_rejected() {
        let cases = vec![
            Primitive::Ball { dim: 2, radius: 0.0 },
            Primitive::Box { half_widths: vec![1.0, -1.0] },
            Primitive::Ellipsoid { q: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]) },
            Primitive::Zonotope { generators: vec![vec![1.0, 1.0], vec![2.0, 2.0]] },
            Primitive::Polytope { vertices: vec![vec![1.0, 0.0]] },
        ];
        for p in cases {
            assert!(matches!(make_primitive(p), Err(Error::DegenerateBody(_))));
        }
    }

    #[test]
    fn linear_image_examples() {
        let b = ball(2, 1.0);
        let id = linear_image(&b, &LinearMap::identity(2)).unwrap();
        assert_eq!(id.support(&[0.6, 0.8]).unwrap(), b.support(&[0.6, 0.8]).unwrap());
        let twice = linear_image(&b, &LinearMap::scalar(2, 2.0)).unwrap();
        assert!((twice.support(&[0.6, 0.8]).unwrap() - 2.0).abs() < 1e-15);
        let bx = make_primitive(Primitive::Box { half_widths: vec![1.0, 1.0] }).unwrap();
        let m = LinearMap::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(linear_image(&bx, &m).unwrap().support(&[1.0, 1.0]).unwrap(), 4.0);
    }

    #[test]
    fn singular_image_warns() {
        let m = LinearMap::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let img = linear_image(&ball(2, 1.0), &m).unwrap();
        assert_eq!(img.warnings().len(), 1);
    }

    #[test]
    fn zero_support_is_degenerate() {
        let flat = SupportBody::from_fn(2, BodyKind::Primitive, Arc::new(|xi: &[f64]| Ok(xi[0].abs())));
        let grid = DirectionGrid::new(2, 8).unwrap();
        assert!(matches!(flat.check_nondegenerate(&grid), Err(Error::DegenerateBody(_))));
    }

    #[test]
    fn samples_are_cached_and_csv_has_rows() {
        let grid = DirectionGrid::new(2, 8).unwrap();
        let b = ball(2, 2.0);
        let a = b.sample(&grid).unwrap();
        let c = b.sample(&grid).unwrap();
        assert!(Arc::ptr_eq(&a, &c));
        let csv = b.samples_csv(&grid).unwrap();
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("xi0,xi1,h"));
    }
}
