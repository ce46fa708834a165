//! Minimal SVG writer for heatmaps, arrows and polylines.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Maps plane coordinates in `[lo, hi]²` onto a square canvas (y up).
pub struct Canvas {
    size: f64,
    lo: f64,
    hi: f64,
    body: String,
}

/// Blue → white → red ramp over `t ∈ [0, 1]`.
pub fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (40.0 + 215.0 * u, 70.0 + 185.0 * u, 180.0 + 75.0 * u)
    } else {
        let u = (t - 0.5) / 0.5;
        (255.0 - 35.0 * u, 255.0 - 185.0 * u, 255.0 - 205.0 * u)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

impl Canvas {
    pub fn new(size: f64, lo: f64, hi: f64) -> Self {
        Self {
            size,
            lo,
            hi,
            body: String::new(),
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        (x - self.lo) / (self.hi - self.lo) * self.size
    }

    pub fn py(&self, y: f64) -> f64 {
        self.size - self.px(y)
    }

    /// Axis-aligned cell centred at `(x, y)` with side `w` in plane units.
    pub fn cell(&mut self, x: f64, y: f64, w: f64, fill: &str) {
        let s = w / (self.hi - self.lo) * self.size;
        let _ = writeln!(
            self.body,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            self.px(x) - s / 2.0,
            self.py(y) - s / 2.0,
            s + 0.5,
            s + 0.5
        );
    }

    pub fn arrow(&mut self, x: f64, y: f64, dx: f64, dy: f64, stroke: &str) {
        let (x0, y0, x1, y1) = (self.px(x), self.py(y), self.px(x + dx), self.py(y + dy));
        let _ = writeln!(
            self.body,
            r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="{stroke}" stroke-width="1" marker-end="url(#head)"/>"#
        );
    }

    pub fn polyline(&mut self, pts: &[[f64; 2]], stroke: &str, opacity: f64) {
        let mut d = String::new();
        for p in pts {
            let _ = write!(d, "{:.2},{:.2} ", self.px(p[0]), self.py(p[1]));
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-opacity="{opacity}" stroke-width="1"/>"#,
            d.trim_end()
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{fill}"/>"#,
            self.px(x),
            self.py(y)
        );
    }

    pub fn render(&self) -> String {
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
                "\n",
                r#"<defs><marker id="head" markerWidth="4" markerHeight="4" refX="3" refY="2" orient="auto"><path d="M0,0 L4,2 L0,4 z" fill="black"/></marker></defs>"#,
                "\n",
                r#"<rect width="{s}" height="{s}" fill="white"/>"#,
                "\n{body}</svg>\n"
            ),
            s = self.size,
            body = self.body
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}
