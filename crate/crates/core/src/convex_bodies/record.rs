//! Structured text records for bodies: `{kind, dimension, params, samples?}`.

use serde::{Deserialize, Serialize};

use super::body::{linear_image, make_primitive, LinearMap, Primitive, SupportBody};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ShapeSpec {
    Box { half_widths: Vec<f64> },
    Ball { radius: f64 },
    Ellipsoid { q: Vec<Vec<f64>> },
    Polytope { vertices: Vec<Vec<f64>> },
    Zonotope { generators: Vec<Vec<f64>> },
    LinearImage { map: Vec<Vec<f64>>, body: Box<BodyRecord> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyRecord {
    #[serde(flatten)]
    pub shape: ShapeSpec,
    pub dimension: usize,
    /// Optional rows `(xi..., h)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
}

impl BodyRecord {
    pub fn to_primitive(&self) -> Result<Option<Primitive>> {
        let p = match &self.shape {
            ShapeSpec::Box { half_widths } => Primitive::Box { half_widths: half_widths.clone() },
            ShapeSpec::Ball { radius } => Primitive::Ball { dim: self.dimension, radius: *radius },
            ShapeSpec::Ellipsoid { q } => Primitive::Ellipsoid { q: linalg::from_rows(q)? },
            ShapeSpec::Polytope { vertices } => Primitive::Polytope { vertices: vertices.clone() },
            ShapeSpec::Zonotope { generators } => Primitive::Zonotope { generators: generators.clone() },
            ShapeSpec::LinearImage { .. } => return Ok(None),
        };
        if p.dim() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: p.dim() });
        }
        Ok(Some(p))
    }

    pub fn to_body(&self) -> Result<SupportBody> {
        if let Some(p) = self.to_primitive()? {
            return make_primitive(p);
        }
        match &self.shape {
            ShapeSpec::LinearImage { map, body } => {
                let inner = body.to_body()?;
                let m = LinearMap::from_rows(map)?;
                linear_image(&inner, &m)
            }
            _ => unreachable!("primitive handled above"),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
