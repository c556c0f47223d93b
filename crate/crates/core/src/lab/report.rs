//! Convergence reports, log-log rate fits and their CSV/JSON/SVG renderings.

use std::fmt::Write as _;

use serde::Serialize;

use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::limit_shape::Route;

pub const FLAG_NOT_CONVERGED: &str = "not_converged";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub rho_shape: f64,
    pub t12: f64,
    pub t21: f64,
    pub wall_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

/// Least-squares line `log rho = slope * log T + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// OLS on `(log T, log rho)`; points with non-positive or non-finite values
/// are skipped.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, r)| t.is_finite() && *t > 0.0 && r.is_finite() && *r > 0.0)
        .map(|&(t, r)| (t.ln(), r.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable points, need 3", pts.len())));
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all T values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(SlopeFit { slope, intercept, r_squared, points: pts.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub package: String,
    pub version: String,
    pub config: Scenario,
}

impl Provenance {
    pub fn new(config: &Scenario) -> Self {
        Self { package: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into(), config: config.clone() }
    }
}

/// Measured distances of the normalized reachable sets to the limit shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub system: String,
    pub route: Route,
    pub rows: Vec<ReportRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<SlopeFit>,
    /// Every distance is zero: the shape does not change with `T`.
    pub constant_shape: bool,
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filtration_dims: Option<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    /// Builds the summary fields from the rows; flagged rows stay out of
    /// the fit.
    pub fn assemble(system: &str, route: Route, rows: Vec<ReportRow>, dims: Option<Vec<usize>>, warnings: Vec<String>) -> Self {
        let mut flags: Vec<String> = rows
            .iter()
            .filter_map(|r| r.flag.as_ref().map(|f| format!("T={}: {f}", r.t)))
            .collect();
        let usable: Vec<(f64, f64)> = rows.iter().filter(|r| r.flag.is_none()).map(|r| (r.t, r.rho_shape)).collect();
        let constant_shape = !rows.is_empty() && rows.iter().all(|r| r.rho_shape == 0.0);
        let fit = match fit_loglog_slope(&usable) {
            Ok(f) => Some(f),
            Err(e) => {
                if !constant_shape {
                    flags.push(format!("no slope fit: {e}"));
                }
                None
            }
        };
        Self { system: system.into(), route, rows, fit, constant_shape, flags, filtration_dims: dims, warnings }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,rho_shape,t12,t21,wall_ms,flag\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.t,
                r.rho_shape,
                r.t12,
                r.t21,
                r.wall_ms,
                r.flag.as_deref().unwrap_or("")
            );
        }
        out
    }

    /// Static log-log plot of `rho` against `T` with the fitted line.
    pub fn to_svg(&self) -> String {
        super::svg::loglog_plot(self)
    }
}

/// All reports of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub reports: Vec<ConvergenceReport>,
    /// Shape distance between the two routes' limit bodies (route `both`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_route_distance: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

/// Renders one report; JSON renders the whole outcome.
pub fn emit_report(outcome: &ScenarioOutcome, index: usize, format: ReportFormat) -> Result<String> {
    let report = outcome.reports.get(index).ok_or_else(|| Error::Invalid(format!("no report {index}")))?;
    Ok(match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Svg => report.to_svg(),
        ReportFormat::Json => serde_json::to_string_pretty(outcome)? + "\n",
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, rho: f64, flag: Option<&str>) -> ReportRow {
        ReportRow { t, rho_shape: rho, t12: 1.0, t21: 1.0, wall_ms: 0.0, flag: flag.map(String::from) }
    }

    #[test]
    fn slope_examples() {
        let ts: Vec<f64> = (2..=8).map(|j| 0.5f64.powi(j)).collect();
        let lin: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 0.3 * t)).collect();
        let f = fit_loglog_slope(&lin).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-9 && (f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.intercept - 0.3f64.ln()).abs() < 1e-9);
        let quad: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 2.0 * t * t)).collect();
        assert!((fit_loglog_slope(&quad).unwrap().slope - 2.0).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 0.1)).collect();
        assert!(fit_loglog_slope(&flat).unwrap().slope.abs() < 1e-12);
        assert!(matches!(fit_loglog_slope(&lin[..2]), Err(Error::InsufficientData(_))));
        let zeros: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 0.0)).collect();
        assert!(matches!(fit_loglog_slope(&zeros), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn csv_rows_and_flags() {
        let rows: Vec<ReportRow> = (2..=8).map(|j| row(0.5f64.powi(j), 0.5f64.powi(j) * 0.1, None)).collect();
        let r = ConvergenceReport::assemble("x", Route::Filtration, rows, None, vec![]);
        assert_eq!(r.to_csv().lines().count(), 8);
        assert!(r.flags.is_empty());

        let mut rows: Vec<ReportRow> = (2..=5).map(|j| row(0.5f64.powi(j), 0.5f64.powi(j), None)).collect();
        rows[1].flag = Some(FLAG_NOT_CONVERGED.into());
        let r = ConvergenceReport::assemble("x", Route::Filtration, rows, None, vec![]);
        assert!(r.to_csv().lines().nth(2).unwrap().ends_with(",not_converged"));
        assert_eq!(r.flags.len(), 1);
        assert_eq!(r.fit.unwrap().points, 3);
    }

    #[test]
    fn constant_shape_has_no_fit_flag() {
        let rows: Vec<ReportRow> = (2..=5).map(|j| row(0.5f64.powi(j), 0.0, None)).collect();
        let r = ConvergenceReport::assemble("x", Route::Brunovsky, rows, None, vec![]);
        assert!(r.constant_shape && r.fit.is_none() && r.flags.is_empty());
    }

    #[test]
    fn csv_slope_reproduces_summary() {
        let rows: Vec<ReportRow> = (2..=8).map(|j| row(0.5f64.powi(j), 0.7 * 0.5f64.powi(j).powf(1.3) + 1e-4, None)).collect();
        let r = ConvergenceReport::assemble("x", Route::Filtration, rows, None, vec![]);
        let parsed: Vec<(f64, f64)> = r
            .to_csv()
            .lines()
            .skip(1)
            .map(|l| {
                let c: Vec<&str> = l.split(',').collect();
                (c[0].parse().unwrap(), c[1].parse().unwrap())
            })
            .collect();
        let again = fit_loglog_slope(&parsed).unwrap();
        assert!((again.slope - r.fit.unwrap().slope).abs() < 1e-12);
    }
}
