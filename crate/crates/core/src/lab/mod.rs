//! Scenario runner: builtin systems, T sweeps, rate fits and reports.

pub mod builtins;
pub mod report;
pub mod run;
pub mod scenario;
mod svg;

pub use builtins::{builtin_system, BUILTIN_NAMES};
pub use report::{emit_report, fit_loglog_slope, ConvergenceReport, ReportFormat, ReportRow, ScenarioOutcome, SlopeFit};
pub use run::{configure_threads, run_scenario, write_outputs, THREADS_ENV};
pub use scenario::{Outputs, RouteChoice, Scenario, TGrid};
