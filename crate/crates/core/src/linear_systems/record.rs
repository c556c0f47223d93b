//! System files: `{n, m, "A": rows | {"taylor": [...]}, "B": ..., "U": body}`
//! or `{"builtin": name}` with an optional `"U"` override.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::system::{LinearSystem, LtiSystem, LtvSystem};
use crate::convex_bodies::{BodyRecord, ControlSet};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Constant(Vec<Vec<f64>>),
    Taylor { taylor: Vec<Vec<Vec<f64>>> },
}

impl MatrixSpec {
    fn coefficients(&self) -> Result<Vec<DMatrix<f64>>> {
        match self {
            MatrixSpec::Constant(rows) => Ok(vec![linalg::from_rows(rows)?]),
            MatrixSpec::Taylor { taylor } => taylor.iter().map(|rows| linalg::from_rows(rows)).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixSpec>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixSpec>,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub u: Option<BodyRecord>,
}

impl SystemRecord {
    pub fn to_system(&self) -> Result<LinearSystem> {
        let control = self.u.as_ref().map(ControlSet::from_record).transpose()?;
        if let Some(name) = &self.builtin {
            let sys = crate::lab::builtin_system(name)?;
            return match (control, sys) {
                (None, s) => Ok(s),
                (Some(u), LinearSystem::Lti(s)) => Ok(s.with_control(u)?.into()),
                (Some(_), LinearSystem::Ltv(_)) => Err(Error::Invalid("control override is only supported for time-invariant builtins".into())),
            };
        }
        let a = self.a.as_ref().ok_or_else(|| Error::Invalid("system record needs A".into()))?.coefficients()?;
        let b = self.b.as_ref().ok_or_else(|| Error::Invalid("system record needs B".into()))?.coefficients()?;
        let n = a[0].nrows();
        let m = b[0].ncols();
        if self.n.is_some_and(|v| v != n) {
            return Err(Error::DimensionMismatch { expected: self.n.unwrap_or(0), got: n });
        }
        if self.m.is_some_and(|v| v != m) {
            return Err(Error::DimensionMismatch { expected: self.m.unwrap_or(0), got: m });
        }
        let u = control.unwrap_or_else(|| ControlSet::unit_box(m));
        if a.len() == 1 && b.len() == 1 {
            Ok(LtiSystem::new(a[0].clone(), b[0].clone(), u)?.into())
        } else {
            Ok(LtvSystem::from_taylor(a, b, u)?.into())
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Resolves a CLI system argument: a builtin name or a path to a system file.
pub fn load_system(arg: &str) -> Result<LinearSystem> {
    if crate::lab::BUILTIN_NAMES.contains(&arg) {
        return crate::lab::builtin_system(arg);
    }
    let path = Path::new(arg);
    if !path.exists() {
        // report unknown builtins with the list of names
        return crate::lab::builtin_system(arg);
    }
    SystemRecord::from_json(&std::fs::read_to_string(path)?)?.to_system()
}
