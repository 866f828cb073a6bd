//! Minimal SVG emission: time-series curves and field heatmaps. No
//! dependencies, deterministic output.

use std::fmt::Write as _;

use lrbs_core::geometry::Geometry;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

/// Polyline chart of one or more labeled series over a shared x-axis.
pub fn line_chart(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="monospace" font-size="16">{}</text>"#,
        MARGIN,
        escape(title)
    );
    let points: Vec<&(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter()).collect();
    if points.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in points {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    // axes
    let _ = writeln!(
        out,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{m}" y="{y}" font-family="monospace" font-size="11">{x0:.6} .. {x1:.6}</text>"#,
        m = MARGIN,
        y = HEIGHT - MARGIN / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text x="4" y="{y}" font-family="monospace" font-size="11">{y0:.6} .. {y1:.6}</text>"#,
        y = MARGIN
    );
    const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
    for (idx, (label, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = COLORS[idx % COLORS.len()];
        let path: String = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            r#"<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-family="monospace" font-size="11" fill="{color}">{}</text>"#,
            escape(label),
            x = WIDTH - MARGIN - 160.0,
            y = MARGIN + 14.0 * (idx as f64 + 1.0)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Density heatmap of a field (one strip for 1d, a grid for 2d).
pub fn heatmap(title: &str, geometry: &Geometry, values: &[f64]) -> String {
    let extents = geometry.extents();
    let (nx, ny) = match extents.len() {
        1 => (extents[0], 1),
        _ => (extents[1], extents[0]), // row-major: axis 0 is the row
    };
    let cell = ((WIDTH - 2.0 * MARGIN) / nx as f64).min((HEIGHT - 2.0 * MARGIN) / ny as f64);
    let vmax = values.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="monospace" font-size="16">{} (max {:.3})</text>"#,
        MARGIN,
        escape(title),
        vmax
    );
    for (i, v) in values.iter().enumerate() {
        let (row, col) = if extents.len() == 1 { (0, i) } else { (i / nx, i % nx) };
        let shade = (1.0 - (v / vmax).clamp(0.0, 1.0)) * 255.0;
        let shade = shade.round() as u8;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
            MARGIN + col as f64 * cell,
            MARGIN + row as f64 * cell,
            cell,
            cell
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
