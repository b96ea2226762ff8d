//! Minimal deterministic SVG plots: overlaid histogram outlines and line
//! charts. Coordinates are printed with three decimals; nothing depends on
//! time or environment.

use std::fmt::Write;

use crate::error::{Error, Result};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 300.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One outline: a name and per-bin heights.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

fn header(out: &mut String, title: &str, stamp: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, "<!-- {} -->", stamp.replace("--", "- -"));
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="20" font-size="12" font-family="sans-serif">{}</text>"#, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{MARGIN} {} H{} M{MARGIN} {} V{MARGIN}" stroke="black" fill="none"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN
    );
}

fn legend(out: &mut String, names: impl Iterator<Item = String>) {
    for (s, name) in names.enumerate() {
        let y = MARGIN + 14.0 * s as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{y:.3}" font-size="10" font-family="sans-serif" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 110.0,
            PALETTE[s % PALETTE.len()],
            escape(&name)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Overlaid step outlines over `[lo, hi]`, one polyline per series with two
/// vertices per bin. `marker` draws a vertical line (e.g. a true value).
pub fn histogram_svg(title: &str, stamp: &str, lo: f64, hi: f64, series: &[Series], marker: Option<f64>) -> Result<String> {
    let bins = series.first().map(|s| s.values.len()).unwrap_or(0);
    if series.is_empty() || bins == 0 || series.iter().any(|s| s.values.len() != bins) {
        return Err(Error::InvalidData("histogram plot needs at least one non-empty series of equal length".into()));
    }
    if !(hi > lo) {
        return Err(Error::InvalidData("histogram plot needs hi > lo".into()));
    }
    let top = series.iter().flat_map(|s| s.values.iter()).fold(0.0f64, |a, &b| a.max(b));
    let top = if top > 0.0 { top } else { 1.0 };
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let x = |b: f64| MARGIN + pw * b / bins as f64;
    let y = |v: f64| HEIGHT - MARGIN - ph * v / top;
    let mut out = String::new();
    header(&mut out, title, stamp);
    for (s, ser) in series.iter().enumerate() {
        let mut points = Vec::with_capacity(2 * bins);
        for (b, &v) in ser.values.iter().enumerate() {
            points.push(format!("{:.3},{:.3}", x(b as f64), y(v)));
            points.push(format!("{:.3},{:.3}", x(b as f64 + 1.0), y(v)));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            points.join(" "),
            PALETTE[s % PALETTE.len()]
        );
    }
    if let Some(m) = marker {
        if (lo..=hi).contains(&m) {
            let mx = MARGIN + pw * (m - lo) / (hi - lo);
            let _ = writeln!(out, r#"<line x1="{mx:.3}" y1="{MARGIN}" x2="{mx:.3}" y2="{}" stroke="black" stroke-dasharray="4 2"/>"#, HEIGHT - MARGIN);
        }
    }
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{}" font-size="10" font-family="sans-serif">{lo:.3}</text>"#, HEIGHT - MARGIN + 14.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" font-family="sans-serif" text-anchor="end">{hi:.3}</text>"#, WIDTH - MARGIN, HEIGHT - MARGIN + 14.0);
    legend(&mut out, series.iter().map(|s| s.name.clone()));
    out.push_str("</svg>\n");
    Ok(out)
}

/// Line chart of each series against its index, y-range `[0, y_max]`.
pub fn line_svg(title: &str, stamp: &str, series: &[Series], y_max: f64) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.values.is_empty()) {
        return Err(Error::InvalidData("line plot needs non-empty series".into()));
    }
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(1).max(2);
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    header(&mut out, title, stamp);
    for (s, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let px = MARGIN + pw * i as f64 / (n - 1) as f64;
                let py = HEIGHT - MARGIN - ph * (v / y_max).clamp(0.0, 1.0);
                format!("{px:.3},{py:.3}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            PALETTE[s % PALETTE.len()]
        );
    }
    legend(&mut out, series.iter().map(|s| s.name.clone()));
    out.push_str("</svg>\n");
    Ok(out)
}

/// Scatter of `(x, y)` points with per-point colour index.
pub fn scatter_svg(title: &str, stamp: &str, points: &[(f64, f64, usize)], bounds: [f64; 4]) -> Result<String> {
    let [x0, x1, y0, y1] = bounds;
    if points.is_empty() || !(x1 > x0 && y1 > y0) {
        return Err(Error::InvalidData("scatter plot needs points and non-empty bounds".into()));
    }
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    header(&mut out, title, stamp);
    for &(x, y, c) in points {
        let px = MARGIN + pw * ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        let py = HEIGHT - MARGIN - ph * ((y - y0) / (y1 - y0)).clamp(0.0, 1.0);
        let _ = writeln!(out, r#"<circle cx="{px:.3}" cy="{py:.3}" r="1.5" fill="{}"/>"#, PALETTE[c % PALETTE.len()]);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(name: &str, v: &[f64]) -> Series {
        Series { name: name.into(), values: v.to_vec() }
    }

    #[test]
    fn one_polyline_per_series_two_vertices_per_bin() {
        let svg = histogram_svg("t", "hash", 0.0, 1.0, &[series("a", &[0.1, 0.5, 0.4])], None).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 6);
        let two = histogram_svg("t", "hash", 0.0, 1.0, &[series("a", &[1.0, 2.0]), series("b", &[2.0, 1.0])], Some(0.5)).unwrap();
        assert_eq!(two.matches("<polyline").count(), 2);
        assert!(two.contains("<line"));
    }

    #[test]
    fn output_is_deterministic() {
        let s = [series("exact", &[0.2, 0.3, 0.5]), series("bethe", &[0.25, 0.25, 0.5])];
        assert_eq!(histogram_svg("w[0,1]", "x", -1.0, 1.0, &s, None).unwrap(), histogram_svg("w[0,1]", "x", -1.0, 1.0, &s, None).unwrap());
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(histogram_svg("t", "", 0.0, 1.0, &[], None).is_err());
        assert!(line_svg("t", "", &[], 1.0).is_err());
        assert!(scatter_svg("t", "", &[], [0.0, 1.0, 0.0, 1.0]).is_err());
    }
}
