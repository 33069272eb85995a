use crate::run::ResultRow;
use crate::trend::{fit_points, fit_trend, Predictor, TrendFit};
use crate::CliError;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub predictor: Predictor,
    /// Degree of the overlaid fit; `None` draws points only.
    pub fit_degree: Option<usize>,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOutput {
    pub svg: String,
    /// `series,x,y` with `y = log10(nsrfs)`.
    pub csv: String,
    pub fit: Option<TrendFit>,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const FIT_SAMPLES: usize = 50;

fn range(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let lo = v.clone().fold(f64::INFINITY, f64::min);
    let hi = v.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Scatter of NSRFS (log scale) against the predictor with an optional fit.
pub fn emit_plot(rows: &[ResultRow], spec: &PlotSpec) -> Result<PlotOutput, CliError> {
    if rows.is_empty() {
        return Err(CliError::EmptyPlot);
    }
    let (pts, _) = fit_points(rows, spec.predictor);
    let fit = spec.fit_degree.map(|d| fit_trend(rows, spec.predictor, d)).transpose()?;

    let mut curve = Vec::new();
    if let Some(f) = &fit {
        let (a, b) = f.x_range;
        for i in 0..FIT_SAMPLES {
            let x = a + (b - a) * i as f64 / (FIT_SAMPLES - 1) as f64;
            curve.push((x, f.eval(x)));
        }
    }

    let (x0, x1) = range(pts.iter().map(|p| p.0));
    let (y0, y1) = range(pts.iter().chain(&curve).map(|p| p.1));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&spec.title));
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT} {TOP} V{} H{}" fill="none" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT
    );
    for k in 0..=4 {
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.3}</text>"#,
            sx(x),
            H - BOTTOM + 18.0,
            x
        );
    }
    for e in y0 as i64..=y1 as i64 {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
            LEFT - 6.0,
            sy(e as f64) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 16.0,
        spec.predictor.label()
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">shots to reject fair sampling</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0
    );
    for &(x, y) in &pts {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(x), sy(y));
    }
    if !curve.is_empty() {
        let d: Vec<String> = curve
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, sx(x), sy(y)))
            .collect();
        let _ = writeln!(svg, r#"<path d="{}" fill="none" stroke="black"/>"#, d.join(" "));
    }
    svg.push_str("</svg>\n");

    let mut csv = String::from("series,x,y\n");
    for &(x, y) in &pts {
        let _ = writeln!(csv, "point,{x},{y}");
    }
    for &(x, y) in &curve {
        let _ = writeln!(csv, "fit,{x},{y}");
    }
    Ok(PlotOutput { svg, csv, fit })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
