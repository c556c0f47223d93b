use nalgebra::DMatrix;

use super::body::{linear_image, make_primitive, LinearMap, Primitive, SupportBody};
use super::record::{BodyRecord, ShapeSpec};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
enum ControlSpec {
    Primitive(Primitive),
    Image { map: DMatrix<f64>, base: Box<ControlSpec> },
}

impl ControlSpec {
    fn eval(&self, w: &[f64]) -> f64 {
        match self {
            ControlSpec::Primitive(p) => p.eval(w),
            ControlSpec::Image { map, base } => {
                let m = map.nrows();
                let mut v = vec![0.0; m];
                for (j, vj) in v.iter_mut().enumerate() {
                    *vj = (0..m).map(|i| map[(i, j)] * w[i]).sum();
                }
                base.eval(&v)
            }
        }
    }

    fn kink_normals(&self) -> Vec<Vec<f64>> {
        match self {
            ControlSpec::Primitive(p) => p.kink_normals(),
            ControlSpec::Image { map, base } => base
                .kink_normals()
                .into_iter()
                .map(|k| (map * nalgebra::DVector::from_vec(k)).iter().copied().collect())
                .collect(),
        }
    }

    fn record(&self, dim: usize) -> BodyRecord {
        match self {
            ControlSpec::Primitive(p) => BodyRecord { shape: p.to_spec(), dimension: dim, samples: None },
            ControlSpec::Image { map, base } => BodyRecord {
                shape: ShapeSpec::LinearImage { map: linalg::to_rows(map), body: Box::new(base.record(dim)) },
                dimension: dim,
                samples: None,
            },
        }
    }
}

/// Admissible control values: a symmetric body in control space that keeps
/// its constructor parameters, so it can be serialized and its kinks located.
#[derive(Debug, Clone)]
pub struct ControlSet {
    spec: ControlSpec,
    body: SupportBody,
}

impl ControlSet {
    pub fn new(p: Primitive) -> Result<Self> {
        let body = make_primitive(p.clone())?;
        Ok(Self { spec: ControlSpec::Primitive(p), body })
    }

    /// Unit box `[-1, 1]^m`.
    pub fn unit_box(m: usize) -> Self {
        Self::new(Primitive::Box { half_widths: vec![1.0; m] }).expect("unit box is valid")
    }

    pub fn ball(m: usize, radius: f64) -> Result<Self> {
        Self::new(Primitive::Ball { dim: m, radius })
    }

    pub fn from_record(r: &BodyRecord) -> Result<Self> {
        if let Some(p) = r.to_primitive()? {
            return Self::new(p);
        }
        match &r.shape {
            ShapeSpec::LinearImage { map, body } => {
                let base = Self::from_record(body)?;
                base.image(&LinearMap::from_rows(map)?)
            }
            _ => Err(Error::Invalid("unsupported control set record".into())),
        }
    }

    /// The control set `M U`, required invertible.
    pub fn image(&self, m: &LinearMap) -> Result<Self> {
        if m.det().abs() < 1e-12 {
            return Err(Error::Singular("control-space map".into()));
        }
        let body = linear_image(&self.body, m)?;
        Ok(Self { spec: ControlSpec::Image { map: m.matrix().clone(), base: Box::new(self.spec.clone()) }, body })
    }

    pub fn dim(&self) -> usize {
        self.body.dim()
    }

    pub fn body(&self) -> &SupportBody {
        &self.body
    }

    /// `h_U(w)` without dimension checks; hot path of the quadrature.
    #[inline]
    pub fn eval(&self, w: &[f64]) -> f64 {
        self.spec.eval(w)
    }

    pub fn kink_normals(&self) -> Vec<Vec<f64>> {
        self.spec.kink_normals()
    }

    pub fn record(&self) -> BodyRecord {
        self.spec.record(self.dim())
    }
}

impl PartialEq for ControlSet {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}
