//! Minimal log-log SVG plot.

use std::fmt::Write as _;

use super::report::ConvergenceReport;

const W: f64 = 640.0;
const H: f64 = 480.0;
const M: f64 = 60.0;

pub(crate) fn loglog_plot(report: &ConvergenceReport) -> String {
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.t > 0.0 && r.rho_shape > 0.0)
        .map(|r| (r.t.log10(), r.rho_shape.log10()))
        .collect();
    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if pts.is_empty() {
        (x0, x1, y0, y1) = (-3.0, 0.0, -6.0, 0.0);
    }
    (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{} ({})</text>"#,
        W / 2.0,
        report.system,
        report.route.name()
    );
    let _ = writeln!(
        s,
        r#"<path d="M{} {} L{} {} L{} {}" stroke="black" fill="none"/>"#,
        M,
        M,
        M,
        H - M,
        W - M,
        H - M
    );
    for d in x0 as i32..=x1 as i32 {
        let x = sx(d as f64);
        let _ = writeln!(s, r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#, H - M, H - M + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">1e{d}</text>"#,
            H - M + 20.0
        );
    }
    for d in y0 as i32..=y1 as i32 {
        let y = sy(d as f64);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{M}" y2="{y}" stroke="black"/>"#, M - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">1e{d}</text>"#,
            M - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">T</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">rho_shape</text>"#,
        H / 2.0,
        H / 2.0
    );
    if let Some(fit) = report.fit {
        let ln10 = std::f64::consts::LN_10;
        let line = |x: f64| (fit.slope * x * ln10 + fit.intercept) / ln10;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="steelblue" stroke-dasharray="6 4"/>"#,
            sx(x0),
            sy(line(x0)),
            sx(x1),
            sy(line(x1))
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">slope {:.3}, R2 {:.3}</text>"#,
            W - M,
            M + 14.0,
            fit.slope,
            fit.r_squared
        );
    }
    for (x, y) in &pts {
        let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="4" fill="firebrick"/>"#, sx(*x), sy(*y));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::super::report::{ConvergenceReport, ReportRow};
    use crate::limit_shape::Route;

    #[test]
    fn plot_has_points_and_fit_line() {
        let rows: Vec<ReportRow> = (2..=8)
            .map(|j| {
                let t = 0.5f64.powi(j);
                ReportRow { t, rho_shape: 0.2 * t, t12: 1.0, t21: 1.0, wall_ms: 0.0, flag: None }
            })
            .collect();
        let r = ConvergenceReport::assemble("demo", Route::Filtration, rows, None, vec![]);
        let svg = r.to_svg();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 7);
        assert!(svg.contains("stroke-dasharray"));
    }
}
