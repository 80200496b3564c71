//! Bare-bones SVG scatter of information ratio against dimension.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const PAD: f64 = 40.0;

/// Scatter of `(d, ratio)` points with the dashed line `d / 2`.
pub fn ratio_scatter(points: &[(usize, f64)]) -> String {
    let d_lo = points.iter().map(|p| p.0).min().unwrap_or(1) as f64;
    let d_hi = points.iter().map(|p| p.0).max().unwrap_or(2) as f64;
    let d_hi = if d_hi > d_lo { d_hi } else { d_lo + 1.0 };
    let y_hi = points.iter().map(|p| p.1).fold(d_hi / 2.0, f64::max).max(1e-12);
    let x = |d: f64| PAD + (d - d_lo) / (d_hi - d_lo) * (WIDTH - 2.0 * PAD);
    let y = |v: f64| HEIGHT - PAD - v / y_hi * (HEIGHT - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        b = HEIGHT - PAD,
        r = WIDTH - PAD
    );
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = HEIGHT - PAD
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="red" stroke-dasharray="6 4"/>"#,
        x(d_lo),
        y(d_lo / 2.0),
        x(d_hi),
        y(d_hi / 2.0)
    );
    for &(d, r) in points {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="steelblue" fill-opacity="0.5"/>"#,
            x(d as f64),
            y(r)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">d</text>"#,
        WIDTH / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" font-size="12" transform="rotate(-90 12 {})">information ratio</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    s.push_str("</svg>\n");
    s
}
