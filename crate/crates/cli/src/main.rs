//! `reachshape`: reachable sets, Brunovsky forms, limit shapes and
//! convergence sweeps from the command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::json;

use reachshape::brunovsky::brunovsky_transform;
use reachshape::convex_bodies::{bm_distance, containment_factor, shape_distance, BodyRecord, DirectionGrid, ShapeOptions, SupportBody};
use reachshape::lab::{configure_threads, run_scenario, write_outputs, RouteChoice, Scenario, TGrid};
use reachshape::limit_shape::limit_shape;
use reachshape::linear_systems::load_system;
use reachshape::reachable::{reach_body, DEFAULT_RTOL};

#[derive(Parser)]
#[command(name = "reachshape", version, about = "Shapes of small-time reachable sets of linear control systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Brunovsky,
    Filtration,
    Both,
}

impl From<RouteArg> for RouteChoice {
    fn from(r: RouteArg) -> Self {
        match r {
            RouteArg::Brunovsky => RouteChoice::Brunovsky,
            RouteArg::Filtration => RouteChoice::Filtration,
            RouteArg::Both => RouteChoice::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample the support function of the reachable set D(T).
    Reach {
        /// Builtin name or path to a system file.
        #[arg(long)]
        system: String,
        #[arg(long = "T")]
        t_final: f64,
        #[arg(long, default_value_t = 720)]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_RTOL)]
        rtol: f64,
        /// CSV output (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print controllability indices, P, K, G and the reconstruction residual.
    Brunovsky {
        #[arg(long)]
        system: String,
    },
    /// Sample the small-time limit body.
    LimitShape {
        #[arg(long)]
        system: String,
        #[arg(long, default_value_t = 720)]
        grid: usize,
        #[arg(long, value_enum, default_value = "filtration")]
        route: RouteArg,
        #[arg(long, default_value_t = DEFAULT_RTOL)]
        rtol: f64,
        /// Order bound of the filtration.
        #[arg(long)]
        k_max: Option<usize>,
        /// CSV output (stdout when omitted); `both` suffixes the route name.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep T, measure the normalized shape distance and fit the rate.
    Converge {
        /// Scenario file; explicit flags override its fields.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        factor: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long, value_enum)]
        route: Option<RouteArg>,
        #[arg(long)]
        k_max: Option<usize>,
        /// Record wall-clock times per point.
        #[arg(long)]
        timing: bool,
        /// JSON summary.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Banach-Mazur distance between two body files.
    Bm {
        #[arg(long = "bodyA")]
        body_a: PathBuf,
        #[arg(long = "bodyB")]
        body_b: PathBuf,
        #[arg(long, default_value_t = 720)]
        grid: usize,
        /// Also report the shape distance (optimized over linear maps).
        #[arg(long)]
        shape: bool,
    },
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn samples_csv(body: &SupportBody, grid: &DirectionGrid) -> Result<String> {
    let h = body.sample(grid)?;
    let mut out: String = (0..grid.dim()).map(|i| format!("xi{i},")).collect();
    out.push_str("H\n");
    for (d, v) in grid.iter().zip(h.iter()) {
        for x in d {
            let _ = write!(out, "{x},");
        }
        let _ = writeln!(out, "{v}");
    }
    Ok(out)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn load_body(path: &PathBuf) -> Result<SupportBody> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(BodyRecord::from_json(&text)?.to_body()?)
}

fn suffixed(path: &Path, name: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match path.extension() {
        Some(ext) => path.with_file_name(format!("{stem}.{name}.{}", ext.to_string_lossy())),
        None => path.with_file_name(format!("{stem}.{name}")),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Reach { system, t_final, grid, rtol, out } => {
            let sys = load_system(&system)?;
            let grid = DirectionGrid::new(sys.n(), grid)?;
            let body = reach_body(&sys, t_final, rtol)?;
            write_or_print(out.as_ref(), &samples_csv(body.body(), &grid)?)?;
            log::info!("{}", serde_json::to_string(&body.provenance())?);
        }
        Command::Brunovsky { system } => {
            let sys = load_system(&system)?;
            let Some(lti) = sys.as_lti() else { bail!("the Brunovsky form needs a time-invariant system") };
            let form = brunovsky_transform(lti.a(), lti.b())?;
            let (ra, rb) = form.residuals(lti.a(), lti.b())?;
            let report = json!({
                "indices": form.indices,
                "P": rows(&form.p),
                "K": rows(&form.k),
                "G": rows(&form.g),
                "condition": form.condition(),
                "max_residual": ra.max(rb),
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::LimitShape { system, grid, route, rtol, k_max, out } => {
            let sys = load_system(&system)?;
            let grid = DirectionGrid::new(sys.n(), grid)?;
            let choice: RouteChoice = route.into();
            let routes = choice.routes();
            let mut limits = Vec::new();
            for r in &routes {
                let l = limit_shape(&sys, *r, &grid, rtol, k_max)?;
                if let Some(dims) = &l.dims {
                    eprintln!("{}: filtration dimensions {dims:?}", r.name());
                }
                for w in &l.warnings {
                    eprintln!("warning: {w}");
                }
                let csv = samples_csv(&l.body, &grid)?;
                match (&out, routes.len()) {
                    (Some(p), 1) => write_or_print(Some(p), &csv)?,
                    (Some(p), _) => write_or_print(Some(&suffixed(p, r.name())), &csv)?,
                    (None, _) => write_or_print(None, &csv)?,
                }
                limits.push(l);
            }
            if limits.len() == 2 {
                let d = shape_distance(&limits[0].body, &limits[1].body, &grid, &ShapeOptions::default())?;
                println!("cross_route_shape_distance,{}", d.distance);
            }
        }
        Command::Converge { scenario, system, tmax, factor, steps, grid, rtol, route, k_max, timing, out, csv, svg } => {
            let mut sc = match &scenario {
                Some(p) => Scenario::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
                None => Scenario::default(),
            };
            if scenario.is_none() && system.is_none() {
                bail!("converge needs --system or --scenario");
            }
            let TGrid { t_max, factor: f0, steps: s0 } = sc.t_grid.clone();
            sc.t_grid = TGrid { t_max: tmax.unwrap_or(t_max), factor: factor.unwrap_or(f0), steps: steps.unwrap_or(s0) };
            if let Some(s) = system {
                sc.system = s;
            }
            if let Some(g) = grid {
                sc.grid = g;
            }
            if let Some(r) = rtol {
                sc.rtol = r;
            }
            if let Some(r) = route {
                sc.route = r.into();
            }
            if k_max.is_some() {
                sc.k_max = k_max;
            }
            sc.timing |= timing;
            sc.outputs.json = out.or(sc.outputs.json);
            sc.outputs.csv = csv.or(sc.outputs.csv);
            sc.outputs.svg = svg.or(sc.outputs.svg);
            let outcome = run_scenario(&sc)?;
            write_outputs(&sc, &outcome)?;
            for r in &outcome.reports {
                let fit = match (r.fit, r.constant_shape) {
                    (Some(f), _) => format!("slope {} (R2 {})", f.slope, f.r_squared),
                    (None, true) => "constant shape".into(),
                    (None, false) => "no fit".into(),
                };
                println!("{} [{}]: {fit}", r.system, r.route.name());
                for row in &r.rows {
                    println!("  T={} rho={}{}", row.t, row.rho_shape, row.flag.as_ref().map(|f| format!(" ({f})")).unwrap_or_default());
                }
                for f in &r.flags {
                    println!("  flag: {f}");
                }
            }
            if let Some(d) = outcome.cross_route_distance {
                println!("cross-route shape distance: {d}");
            }
        }
        Command::Bm { body_a, body_b, grid, shape } => {
            let a = load_body(&body_a)?;
            let b = load_body(&body_b)?;
            if a.dim() != b.dim() {
                bail!("bodies live in different dimensions ({} and {})", a.dim(), b.dim());
            }
            let grid = DirectionGrid::new(a.dim(), grid)?;
            let mut report = json!({
                "rho": bm_distance(&a, &b, &grid)?,
                "t12": containment_factor(&a, &b, &grid)?,
                "t21": containment_factor(&b, &a, &grid)?,
            });
            if shape {
                report["shape_distance"] = json!(shape_distance(&a, &b, &grid, &ShapeOptions::default())?.distance);
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
