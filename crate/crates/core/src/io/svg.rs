//! Deterministic SVG line plots and heatmaps.
//!
//! Coordinates are rounded to fixed precision so the same data always
//! produces byte-identical files.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

/// A named polyline in data coordinates.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        Self { label: label.into(), points, color }
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit<'a>(pts: impl Iterator<Item = &'a (f64, f64)>) -> Self {
        let mut f = Frame { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for &(x, y) in pts {
            if x.is_finite() && y.is_finite() {
                f.x0 = f.x0.min(x);
                f.x1 = f.x1.max(x);
                f.y0 = f.y0.min(y);
                f.y1 = f.y1.max(y);
            }
        }
        if !f.x0.is_finite() {
            return Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        }
        if f.x1 - f.x0 <= 0.0 {
            f.x0 -= 0.5;
            f.x1 += 0.5;
        }
        if f.y1 - f.y0 <= 0.0 {
            f.y0 -= 0.5;
            f.y1 += 0.5;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for (v, anchor, x, y) in [
        (f.x0, "start", MARGIN, H - MARGIN + 16.0),
        (f.x1, "end", W - MARGIN, H - MARGIN + 16.0),
    ] {
        let _ = writeln!(out, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#, tick(v));
    }
    for (v, y) in [(f.y0, H - MARGIN), (f.y1, MARGIN + 10.0)] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, MARGIN - 4.0, tick(v));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of one or more series with a shared frame.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter()));
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let mut pts = String::new();
        for &(x, y) in s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = write!(pts, "{:.2},{:.2} ", f.px(x), f.py(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            s.color,
            pts.trim_end()
        );
        let ly = MARGIN + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{}">{}</text>"#,
            MARGIN + 8.0,
            s.color,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heatmap of nodal values on a tensor grid (`values[i * ny + j]` at `(xs[i], ys[j])`).
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64], values: &[f64]) -> String {
    let corners = [(xs[0], ys[0]), (xs[xs.len() - 1], ys[ys.len() - 1])];
    let f = Frame::fit(corners.iter());
    let (vmin, vmax) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    let mut out = String::new();
    header(&mut out, title);
    let ny = ys.len();
    let cell = |v: &[f64], k: usize| {
        let lo = if k == 0 { v[0] } else { 0.5 * (v[k - 1] + v[k]) };
        let hi = if k + 1 == v.len() { v[k] } else { 0.5 * (v[k] + v[k + 1]) };
        (lo, hi)
    };
    for i in 0..xs.len() {
        let (xa, xb) = cell(xs, i);
        for j in 0..ny {
            let (ya, yb) = cell(ys, j);
            let v = values[i * ny + j];
            let t = if v.is_finite() { ((v - vmin) / span).clamp(0.0, 1.0) } else { 0.0 };
            let (r, g, b) = ramp(t);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},{g},{b})"/>"#,
                f.px(xa),
                f.py(yb),
                (f.px(xb) - f.px(xa)).max(0.01),
                (f.py(ya) - f.py(yb)).max(0.01)
            );
        }
    }
    axes(&mut out, &f, xlabel, ylabel);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">range [{}, {}]</text>"#,
        W - MARGIN,
        MARGIN - 6.0,
        tick(vmin),
        tick(vmax)
    );
    out.push_str("</svg>\n");
    out
}

/// Blue to red through white.
fn ramp(t: f64) -> (u8, u8, u8) {
    let c = |x: f64| (255.0 * x.clamp(0.0, 1.0)).round() as u8;
    if t < 0.5 {
        let s = 2.0 * t;
        (c(s), c(s), 255)
    } else {
        let s = 2.0 * (1.0 - t);
        (255, c(s), c(s))
    }
}
