//! Minimal single-file SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, CliResult};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Line<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// Plots the lines on shared axes. With `log_y`, non-positive values are
/// dropped and the axis shows `log10(y)`.
pub fn render(title: &str, lines: &[Line<'_>], log_y: bool) -> String {
    let transform = |v: f64| if log_y { v.log10() } else { v };
    let points: Vec<Vec<(f64, f64)>> = lines
        .iter()
        .map(|l| {
            l.x.iter()
                .zip(l.y.iter())
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || **y > 0.0))
                .map(|(x, y)| (*x, transform(*y)))
                .collect()
        })
        .collect();
    let all = points.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {top} V{bottom} H{right}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        top = MARGIN,
        bottom = HEIGHT - MARGIN,
        right = WIDTH - MARGIN
    );
    let y_label = if log_y { "log10" } else { "" };
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{}" text-anchor="middle">{x0:.3}</text>"#, HEIGHT - MARGIN + 16.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{x1:.3}</text>"#, WIDTH - MARGIN, HEIGHT - MARGIN + 16.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{y_label} {y0:.3}</text>"#, MARGIN - 4.0, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{y_label} {y1:.3}</text>"#, MARGIN - 4.0, MARGIN + 4.0);
    for (i, (line, pts)) in lines.iter().zip(points.iter()).enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !pts.is_empty() {
            let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            let _ = writeln!(svg, r#"<polyline points="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#, coords.join(" "));
        }
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            escape(line.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write(path: &Path, title: &str, lines: &[Line<'_>], log_y: bool) -> CliResult<()> {
    std::fs::write(path, render(title, lines, log_y)).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polyline_per_series() {
        let x = [0.0, 1.0, 2.0];
        let svg = render(
            "a < b",
            &[Line { label: "one", x: &x, y: &[1.0, 0.1, 0.01] }, Line { label: "two", x: &x, y: &[0.0, 1.0, 2.0] }],
            true,
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
