//! Self-contained, timestamp-free SVG plots.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 360.0;
const MARGIN: f64 = 56.0;

/// Plot frame mapping data coordinates onto a pixel rectangle.
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn new(x0: f64, y0: f64, w: f64, h: f64, (xmin, xmax): (f64, f64), (ymin, ymax): (f64, f64)) -> Self {
        let (xmin, xmax) = widen(xmin, xmax);
        let (ymin, ymax) = widen(ymin, ymax);
        Self { x0, y0, w, h, xmin, xmax, ymin, ymax }
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, t, r, b) = (self.x0, self.y0, self.x0 + self.w, self.y0 + self.h);
        let _ = writeln!(out, r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##, self.w, self.h);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#, (l + r) / 2.0, t - 12.0, escape(title));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#, (l + r) / 2.0, b + 36.0, escape(xlabel));
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            l - 42.0,
            (t + b) / 2.0,
            l - 42.0,
            (t + b) / 2.0,
            escape(ylabel)
        );
        for (v, pos) in [(self.xmin, l), (self.xmax, r)] {
            let _ = writeln!(out, r#"<text x="{pos:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#, b + 16.0, tick(v));
        }
        for (v, pos) in [(self.ymin, b), (self.ymax, t)] {
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#, l - 4.0, pos + 4.0, tick(v));
        }
        if self.ymin < 0.0 && self.ymax > 0.0 {
            let z = self.py(0.0);
            let _ = writeln!(out, r##"<line x1="{l:.2}" y1="{z:.2}" x2="{r:.2}" y2="{z:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##);
        }
    }
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
        let pad = 0.5 * lo.abs().max(1e-12);
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
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

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Single polyline `y(x)`.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64]) -> String {
    let frame = Frame::new(MARGIN + 10.0, MARGIN, W - 2.0 * MARGIN, H - 2.0 * MARGIN, range(xs.iter().copied()), range(ys.iter().copied()));
    let mut body = String::new();
    frame.axes(&mut body, title, xlabel, ylabel);
    let mut pts = String::new();
    for (x, y) in xs.iter().zip(ys).filter(|(x, y)| x.is_finite() && y.is_finite()) {
        let _ = write!(pts, "{:.2},{:.2} ", frame.px(*x), frame.py(*y));
    }
    let _ = writeln!(body, r##"<polyline class="trace" fill="none" stroke="#1f5fa8" stroke-width="1" points="{}"/>"##, pts.trim_end());
    document(W, H, &body)
}

/// One stem per value, drawn from zero. Non-finite values become hollow
/// markers on the axis.
pub fn stem_plot(title: &str, ylabel: &str, values: &[f64]) -> String {
    let n = values.len();
    let (lo, hi) = range(values.iter().copied());
    let frame = Frame::new(
        MARGIN + 10.0,
        MARGIN,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN,
        (0.0, n.saturating_sub(1) as f64),
        (lo.min(0.0), hi.max(0.0)),
    );
    let mut body = String::new();
    frame.axes(&mut body, title, "draw", ylabel);
    let base = frame.py(0.0);
    for (i, v) in values.iter().enumerate() {
        let x = frame.px(i as f64);
        if v.is_finite() {
            let y = frame.py(*v);
            let color = if *v > 0.0 { "#1f5fa8" } else { "#c0392b" };
            let _ = writeln!(
                body,
                r#"<g class="stem"><line x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{y:.2}" stroke="{color}"/><circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/></g>"#
            );
        } else {
            let _ = writeln!(body, r##"<g class="stem"><circle cx="{x:.2}" cy="{base:.2}" r="3" fill="none" stroke="#888"/></g>"##);
        }
    }
    document(W, H, &body)
}

/// Equal-width bin counts over the finite range of `values`.
pub fn bin_counts(values: &[f64], bins: usize) -> (f64, f64, Vec<usize>) {
    let (lo, hi) = range(values.iter().copied());
    let (lo, hi) = widen(lo, hi);
    let mut counts = vec![0; bins];
    for v in values.iter().filter(|v| v.is_finite()) {
        let k = (((v - lo) / (hi - lo)) * bins as f64).floor() as isize;
        counts[k.clamp(0, bins as isize - 1) as usize] += 1;
    }
    (lo, hi, counts)
}

/// Side-by-side histograms, one panel per `(label, values)`.
pub fn histograms(title: &str, panels: &[(&str, &[f64])], bins: usize) -> String {
    let panel_w = (W - MARGIN) / panels.len().max(1) as f64 - MARGIN;
    let mut body = String::new();
    let _ = writeln!(body, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    for (p, (label, values)) in panels.iter().enumerate() {
        let (lo, hi, counts) = bin_counts(values, bins);
        let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let x0 = MARGIN + 10.0 + p as f64 * (panel_w + MARGIN);
        let frame = Frame::new(x0, MARGIN, panel_w, H - 2.0 * MARGIN, (lo, hi), (0.0, top));
        frame.axes(&mut body, label, label, "count");
        let bw = (hi - lo) / bins as f64;
        for (k, c) in counts.iter().enumerate() {
            let a = frame.px(lo + k as f64 * bw);
            let b = frame.px(lo + (k + 1) as f64 * bw);
            let y = frame.py(*c as f64);
            let _ = writeln!(
                body,
                r##"<rect class="bar" x="{a:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#7fa7d6" stroke="#1f5fa8"/>"##,
                (b - a).max(0.0),
                frame.py(0.0) - y
            );
        }
    }
    document(W, H, &body)
}
