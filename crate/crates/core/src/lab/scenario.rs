//! Scenario files: what to sweep and where to write the results.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::convex_bodies::ShapeOptions;
use crate::error::{Error, Result};
use crate::limit_shape::Route;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteChoice {
    Brunovsky,
    Filtration,
    Both,
}

impl RouteChoice {
    pub fn routes(self) -> Vec<Route> {
        match self {
            RouteChoice::Brunovsky => vec![Route::Brunovsky],
            RouteChoice::Filtration => vec![Route::Filtration],
            RouteChoice::Both => vec![Route::Brunovsky, Route::Filtration],
        }
    }
}

/// Geometric sequence `t_max * factor^i`, `i < steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TGrid {
    pub t_max: f64,
    pub factor: f64,
    pub steps: usize,
}

impl Default for TGrid {
    fn default() -> Self {
        Self { t_max: 0.25, factor: 0.5, steps: 7 }
    }
}

impl TGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.t_max * self.factor.powi(i as i32)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
}

/// A convergence sweep. Every field has a default that is echoed into the
/// report, so a report reproduces its own run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    /// Builtin name or path to a system file.
    pub system: String,
    pub t_grid: TGrid,
    /// Direction count of the metric grid.
    pub grid: usize,
    pub rtol: f64,
    pub optimizer: ShapeOptions,
    pub route: RouteChoice,
    /// Order bound of the filtration (default: `n` or `2n`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Record wall-clock times; off by default so reports are byte-stable.
    pub timing: bool,
    pub outputs: Outputs,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            system: "double_integrator".into(),
            t_grid: TGrid::default(),
            grid: 720,
            rtol: crate::reachable::DEFAULT_RTOL,
            optimizer: ShapeOptions::default(),
            route: RouteChoice::Filtration,
            k_max: None,
            timing: false,
            outputs: Outputs::default(),
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Self = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.t_grid;
        if !(g.t_max.is_finite() && g.t_max > 0.0) {
            return Err(Error::InvalidTime(format!("t_max {} must be positive", g.t_max)));
        }
        if !(g.factor > 0.0 && g.factor < 1.0) {
            return Err(Error::Invalid(format!("T factor {} must lie in (0, 1) for a decreasing sweep", g.factor)));
        }
        if g.steps < 3 {
            return Err(Error::Invalid(format!("a sweep needs at least 3 steps, got {}", g.steps)));
        }
        if g.values().iter().any(|&t| !(t > 0.0)) {
            return Err(Error::TimeResolution("T values underflow".into()));
        }
        if !(self.rtol.is_finite() && self.rtol > 0.0) {
            return Err(Error::Invalid(format!("rtol {} must be positive", self.rtol)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let sc = Scenario::from_json(r#"{"system":"damped_oscillator","route":"brunovsky"}"#).unwrap();
        assert_eq!(sc.t_grid.values(), vec![0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625]);
        assert_eq!(sc.grid, 720);
        assert_eq!(sc.route, RouteChoice::Brunovsky);
    }

    #[test]
    fn invalid_sweeps_rejected() {
        assert!(Scenario::from_json(r#"{"t_grid":{"steps":2}}"#).is_err());
        assert!(Scenario::from_json(r#"{"t_grid":{"factor":1.5}}"#).is_err());
        assert!(Scenario::from_json(r#"{"t_grid":{"t_max":-1}}"#).is_err());
    }

    #[test]
    fn round_trips() {
        let sc = Scenario { k_max: Some(4), ..Scenario::default() };
        let back = Scenario::from_json(&serde_json::to_string(&sc).unwrap()).unwrap();
        assert_eq!(sc, back);
    }
}
