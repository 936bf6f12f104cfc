//! Minimal SVG 1.1 line and band charts.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stroke {
    Solid,
    Dashed,
    /// Points only.
    Dots,
}

#[derive(Debug, Clone)]
pub struct Line {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub stroke: Stroke,
}

/// Shaded region between two curves sharing x values.
#[derive(Debug, Clone)]
pub struct Band {
    pub name: String,
    pub x: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Marker {
    pub name: String,
    pub x: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Line>,
    pub bands: Vec<Band>,
    pub markers: Vec<Marker>,
}

impl Chart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Self::default()
        }
    }

    pub fn line(mut self, name: impl Into<String>, points: Vec<(f64, f64)>, stroke: Stroke) -> Self {
        self.lines.push(Line {
            name: name.into(),
            points,
            stroke,
        });
        self
    }

    pub fn band(mut self, name: impl Into<String>, x: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        self.bands.push(Band {
            name: name.into(),
            x,
            lo,
            hi,
        });
        self
    }

    pub fn marker(mut self, name: impl Into<String>, x: f64) -> Self {
        self.markers.push(Marker { name: name.into(), x });
        self
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for l in &self.lines {
            for &(x, y) in &l.points {
                if x.is_finite() && y.is_finite() {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
        for b in &self.bands {
            for i in 0..b.x.len() {
                if b.x[i].is_finite() && b.lo[i].is_finite() && b.hi[i].is_finite() {
                    xs.push(b.x[i]);
                    ys.push(b.lo[i]);
                    ys.push(b.hi[i]);
                }
            }
        }
        xs.extend(self.markers.iter().map(|m| m.x).filter(|x| x.is_finite()));
        (padded(&xs, 0.0), padded(&ys, 0.05))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        // Axes with five ticks each.
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(fx),
                TOP + ph + 18.0,
                tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                sy(fy) + 4.0,
                tick(fy)
            );
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#dddddd"/>"##,
                LEFT + pw,
                sy(fy),
                sy(fy)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let mut legend = Vec::new();
        for (i, b) in self.bands.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let upper: Vec<String> = (0..b.x.len())
                .filter(|&j| b.lo[j].is_finite() && b.hi[j].is_finite())
                .map(|j| format!("{:.2},{:.2}", sx(b.x[j]), sy(b.hi[j])))
                .collect();
            let lower: Vec<String> = (0..b.x.len())
                .rev()
                .filter(|&j| b.lo[j].is_finite() && b.hi[j].is_finite())
                .map(|j| format!("{:.2},{:.2}", sx(b.x[j]), sy(b.lo[j])))
                .collect();
            if !upper.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                    upper.join(" "),
                    lower.join(" ")
                );
            }
            legend.push((b.name.clone(), color, "band"));
        }
        for (i, l) in self.lines.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            match l.stroke {
                Stroke::Dots => {
                    for &(x, y) in l.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{color}"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
                Stroke::Solid | Stroke::Dashed => {
                    let dash = if l.stroke == Stroke::Dashed { r#" stroke-dasharray="5,3""# } else { "" };
                    // Non-finite values break the curve into segments.
                    for seg in l.points.split(|(x, y)| !(x.is_finite() && y.is_finite())) {
                        if seg.len() < 2 {
                            continue;
                        }
                        let pts: Vec<String> = seg.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                        let _ = writeln!(
                            s,
                            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                            pts.join(" ")
                        );
                    }
                }
            }
            legend.push((l.name.clone(), color, "line"));
        }
        for m in &self.markers {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" x2="{:.2}" y1="{TOP}" y2="{:.1}" stroke="black" stroke-dasharray="2,2"/>"#,
                sx(m.x),
                sx(m.x),
                TOP + ph
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.1}" font-size="10" transform="rotate(-90 {:.2} {:.1})">{}</text>"#,
                sx(m.x) - 3.0,
                TOP + ph - 4.0,
                sx(m.x) - 3.0,
                TOP + ph - 4.0,
                escape(&m.name)
            );
        }
        for (k, (name, color, kind)) in legend.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * k as f64;
            let x = WIDTH - RIGHT + 12.0;
            if *kind == "band" {
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{:.1}" width="18" height="8" fill="{color}" fill-opacity="0.3"/>"#,
                    y - 4.0
                );
            } else {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x}" x2="{:.1}" y1="{y:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/>"#,
                    x + 18.0
                );
            }
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 24.0, y + 4.0, escape(name));
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render()).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn padded(v: &[f64], frac: f64) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * frac;
    (lo - pad, hi + pad)
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && (a < 1e-3 || a >= 1e5) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
