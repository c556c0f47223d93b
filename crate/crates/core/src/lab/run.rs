//! Runs a scenario: one limit body per route, then the T sweep in parallel.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use super::report::{emit_report, ConvergenceReport, Provenance, ReportFormat, ReportRow, ScenarioOutcome, FLAG_NOT_CONVERGED};
use super::scenario::Scenario;
use crate::convex_bodies::{shape_distance, DirectionGrid};
use crate::error::Result;
use crate::limit_shape::{limit_shape, shape_convergence_point, LimitShape, Route};
use crate::linear_systems::{load_system, LinearSystem};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "REACHSHAPE_THREADS";

/// Configures the global thread pool from `REACHSHAPE_THREADS`, if set.
/// Later calls (or a pool that already exists) are ignored.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 && rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok() {
            info!("using {n} worker threads");
        }
    }
}

fn sweep(sys: &LinearSystem, sc: &Scenario, limit: &LimitShape, grid: &DirectionGrid) -> Vec<ReportRow> {
    sc.t_grid
        .values()
        .par_iter()
        .map(|&t| {
            let start = Instant::now();
            let res = shape_convergence_point(sys, t, limit, grid, &sc.optimizer, sc.rtol);
            let wall_ms = if sc.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            match res {
                Ok(r) => ReportRow {
                    t,
                    rho_shape: r.distance,
                    t12: r.t12,
                    t21: r.t21,
                    wall_ms,
                    flag: (!r.converged).then(|| FLAG_NOT_CONVERGED.to_string()),
                },
                Err(e) => {
                    warn!("T={t}: {e}");
                    ReportRow { t, rho_shape: f64::NAN, t12: f64::NAN, t21: f64::NAN, wall_ms, flag: Some(format!("error: {e}")) }
                }
            }
        })
        .collect()
}

/// Computes every route's report. Failures of the limit body (genericity,
/// controllability) abort the run; failures at a single `T` are flagged.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioOutcome> {
    sc.validate()?;
    let sys = load_system(&sc.system)?;
    let grid = DirectionGrid::new(sys.n(), sc.grid)?;
    let mut limits = Vec::new();
    for route in sc.route.routes() {
        info!("{}: computing the {} limit body", sc.system, route.name());
        limits.push(limit_shape(&sys, route, &grid, sc.rtol, sc.k_max)?);
    }
    let reports = limits
        .iter()
        .map(|limit| {
            let rows = sweep(&sys, sc, limit, &grid);
            ConvergenceReport::assemble(&sc.system, limit.route, rows, limit.dims.clone(), limit.warnings.clone())
        })
        .collect();
    let cross_route_distance = if limits.len() == 2 {
        Some(shape_distance(&limits[0].body, &limits[1].body, &grid, &sc.optimizer)?.distance)
    } else {
        None
    };
    Ok(ScenarioOutcome { reports, cross_route_distance, provenance: Provenance::new(sc) })
}

fn suffixed(path: &Path, route: Route, several: bool) -> PathBuf {
    if !several {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{}.{}", route.name(), ext.to_string_lossy()),
        None => format!("{stem}.{}", route.name()),
    };
    path.with_file_name(name)
}

/// Writes the configured outputs; with several routes the CSV and SVG paths
/// get a `.<route>` suffix. Returns the written paths.
pub fn write_outputs(sc: &Scenario, outcome: &ScenarioOutcome) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(p) = &sc.outputs.json {
        std::fs::write(p, emit_report(outcome, 0, ReportFormat::Json)?)?;
        written.push(p.clone());
    }
    let several = outcome.reports.len() > 1;
    for (i, report) in outcome.reports.iter().enumerate() {
        for (path, format) in [(&sc.outputs.csv, ReportFormat::Csv), (&sc.outputs.svg, ReportFormat::Svg)] {
            if let Some(p) = path {
                let p = suffixed(p, report.route, several);
                std::fs::write(&p, emit_report(outcome, i, format)?)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::scenario::{RouteChoice, TGrid};

    fn quick(system: &str, route: RouteChoice) -> Scenario {
        Scenario {
            system: system.into(),
            t_grid: TGrid { t_max: 0.5, factor: 0.5, steps: 3 },
            grid: 180,
            route,
            ..Scenario::default()
        }
    }

    #[test]
    fn double_integrator_shape_is_constant_on_both_routes() {
        let out = run_scenario(&quick("double_integrator", RouteChoice::Both)).unwrap();
        assert_eq!(out.reports.len(), 2);
        for r in &out.reports {
            assert_eq!(r.rows.len(), 3);
            assert!(r.rows.iter().all(|row| row.rho_shape <= 0.03), "{:?}", r.rows);
        }
        assert!(out.cross_route_distance.unwrap() < 0.02);
    }

    #[test]
    fn genericity_failure_aborts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sys.json");
        std::fs::write(
            &path,
            r#"{"n":2,"m":1,"A":[[0,0],[0,0]],"B":[[1],[0]],"U":{"kind":"box","dimension":1,"params":{"half_widths":[1]}}}"#,
        )
        .unwrap();
        let sc = quick(path.to_str().unwrap(), RouteChoice::Filtration);
        assert!(matches!(run_scenario(&sc), Err(crate::Error::Genericity { .. })));
    }

    #[test]
    fn outputs_are_suffixed_for_both_routes() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = quick("ball_system", RouteChoice::Both);
        sc.outputs.json = Some(dir.path().join("r.json"));
        sc.outputs.csv = Some(dir.path().join("r.csv"));
        let out = run_scenario(&sc).unwrap();
        let files = write_outputs(&sc, &out).unwrap();
        let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["r.json", "r.brunovsky.csv", "r.filtration.csv"]);
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(json["provenance"]["config"]["grid"], 180);
    }
}
