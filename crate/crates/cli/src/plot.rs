//! Minimal SVG emission for time series and histograms.

use std::fmt::Write;

use fockbath_core::chaos::HistogramBin;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Frame {
    x: [f64; 2],
    y: [f64; 2],
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                [0.0, 1.0]
            } else if hi - lo < 1e-12 {
                [lo - 0.5, hi + 0.5]
            } else {
                [lo, hi]
            }
        };
        Self { x: range(&mut xs.clone()), y: range(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x[0]) / (self.x[1] - self.x[0]) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y[0]) / (self.y[1] - self.y[0]) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str) {
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(out, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
        let _ = writeln!(out, r#"<text x="{}" y="25" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(xlabel));
        for k in 0..=4 {
            let fx = self.x[0] + (self.x[1] - self.x[0]) * k as f64 / 4.0;
            let fy = self.y[0] + (self.y[1] - self.y[0]) * k as f64 / 4.0;
            let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, self.px(fx), b + 14.0, tick(fx));
            let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#, l - 4.0, self.py(fy) + 3.0, tick(fy));
        }
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Line plot of several series sharing the abscissa.
pub fn line_plot(title: &str, xlabel: &str, t: &[f64], series: &[(&str, &[f64])]) -> String {
    let frame = Frame::new(t.iter().copied(), series.iter().flat_map(|(_, v)| v.iter().copied()));
    let mut out = open();
    frame.axes(&mut out, title, xlabel);
    // Thin long series so files stay small.
    let stride = (t.len() / 2000).max(1);
    for (k, (label, values)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        for (x, y) in t.iter().zip(values.iter()).step_by(stride).filter(|(_, y)| y.is_finite()) {
            let _ = write!(d, "{}{:.1},{:.1} ", if d.is_empty() { "M" } else { "L" }, frame.px(*x), frame.py(*y));
        }
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1"/>"#, d.trim_end());
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#, WIDTH - MARGIN + 4.0, MARGIN + 14.0 * (k as f64 + 1.0), escape(label));
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram bars with the fitted normal density overlaid.
pub fn histogram_plot(title: &str, xlabel: &str, bins: &[HistogramBin]) -> String {
    let xs = bins.iter().flat_map(|b| [b.center - b.width / 2.0, b.center + b.width / 2.0]);
    let ys = bins.iter().flat_map(|b| [0.0, b.density, b.gaussian]);
    let frame = Frame::new(xs, ys);
    let mut out = open();
    frame.axes(&mut out, title, xlabel);
    for b in bins {
        let x0 = frame.px(b.center - b.width / 2.0);
        let x1 = frame.px(b.center + b.width / 2.0);
        let y = frame.py(b.density);
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{}" fill-opacity="0.5" stroke="black" stroke-width="0.5"/>"#,
            x1 - x0,
            frame.py(0.0) - y,
            COLORS[0]
        );
    }
    let d: Vec<String> = bins
        .iter()
        .enumerate()
        .map(|(i, b)| format!("{}{:.1},{:.1}", if i == 0 { "M" } else { "L" }, frame.px(b.center), frame.py(b.gaussian)))
        .collect();
    let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#, d.join(" "), COLORS[1]);
    out.push_str("</svg>\n");
    out
}
