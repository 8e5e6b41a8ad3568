//! Minimal SVG plotting: a data rectangle mapped onto a page with axes,
//! ticks and a legend.

use std::fmt::Write;

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    /// Smallest range covering `values`, padded by 5% on each side.
    pub fn covering(values: impl IntoIterator<Item = f64>) -> Range {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.into_iter().filter(|v| v.is_finite()) {
            min = min.min(v);
            max = max.max(v);
        }
        if min > max {
            return Range { min: 0.0, max: 1.0 };
        }
        let pad = if max > min { (max - min) * 0.05 } else { 0.5 };
        Range {
            min: min - pad,
            max: max + pad,
        }
    }

    fn span(&self) -> f64 {
        self.max - self.min
    }

    fn widen_to(&mut self, span: f64) {
        let c = 0.5 * (self.min + self.max);
        self.min = c - 0.5 * span;
        self.max = c + 0.5 * span;
    }
}

/// Round tick positions, roughly `n` of them, inside `r`.
pub fn ticks(r: Range, n: usize) -> Vec<f64> {
    let raw = r.span() / n.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (r.min / step).ceil() as i64;
    let last = (r.max / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Piecewise-linear viridis approximation for `t` in [0, 1].
pub fn viridis(t: f64) -> String {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - k as f64;
    let c: Vec<u8> = (0..3)
        .map(|i| (STOPS[k][i] + f * (STOPS[k + 1][i] - STOPS[k][i])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub struct Figure {
    width: f64,
    height: f64,
    x: Range,
    y: Range,
    title: String,
    body: String,
    overlay: String,
    legend: Vec<(String, String)>,
}

impl Figure {
    pub fn new(title: &str, width: f64, height: f64, x: Range, y: Range) -> Figure {
        Figure {
            width,
            height,
            x,
            y,
            title: title.to_string(),
            body: String::new(),
            overlay: String::new(),
            legend: Vec::new(),
        }
    }

    /// Widens one axis so a meter spans the same pixels in x and y.
    pub fn equal_aspect(mut self) -> Figure {
        let (w, h) = self.plot_size();
        let sx = self.x.span() / w;
        let sy = self.y.span() / h;
        if sx > sy {
            self.y.widen_to(sx * h);
        } else {
            self.x.widen_to(sy * w);
        }
        self
    }

    fn plot_size(&self) -> (f64, f64) {
        (self.width - MARGIN_LEFT - MARGIN_RIGHT, self.height - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.min) / self.x.span() * self.plot_size().0
    }

    fn py(&self, y: f64) -> f64 {
        MARGIN_TOP + (self.y.max - y) / self.y.span() * self.plot_size().1
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for &(x, y) in pts {
            write!(d, "{:.2},{:.2} ", self.px(x), self.py(y)).unwrap();
        }
        writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
            d.trim_end()
        )
        .unwrap();
    }

    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), color: &str, width: f64, opacity: f64) {
        writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity}"/>"#,
            self.px(a.0),
            self.py(a.1),
            self.px(b.0),
            self.py(b.1)
        )
        .unwrap();
    }

    pub fn circle(&mut self, p: (f64, f64), r: f64, color: &str) {
        writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{color}"/>"#,
            self.px(p.0),
            self.py(p.1)
        )
        .unwrap();
    }

    pub fn legend(&mut self, name: &str, color: &str) {
        self.legend.push((name.to_string(), color.to_string()));
    }

    /// Horizontal color bar in the top-right corner.
    pub fn colorbar(&mut self, range: Range, name: &str) {
        let (x0, y0, w) = (self.width - MARGIN_RIGHT - 160.0, 12.0, 160.0);
        for k in 0..32 {
            writeln!(
                self.overlay,
                r#"<rect x="{:.2}" y="{y0}" width="{:.2}" height="10" fill="{}"/>"#,
                x0 + w * k as f64 / 32.0,
                w / 32.0 + 0.5,
                viridis(k as f64 / 31.0)
            )
            .unwrap();
        }
        writeln!(
            self.overlay,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{} {}</text>"#,
            x0 - 4.0,
            y0 + 9.0,
            escape(name),
            label(range.min)
        )
        .unwrap();
        writeln!(
            self.overlay,
            r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
            x0 + w + 2.0,
            y0 + 9.0,
            label(range.max)
        )
        .unwrap();
    }

    pub fn finish(self, xlabel: &str, ylabel: &str) -> String {
        let (w, h) = self.plot_size();
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
            self.width, self.height, self.width, self.height
        )
        .unwrap();
        writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{MARGIN_LEFT}" y="24" font-size="15">{}</text>"#,
            escape(&self.title)
        )
        .unwrap();
        writeln!(
            s,
            r#"<clipPath id="plot"><rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{w}" height="{h}"/></clipPath>"#
        )
        .unwrap();
        for t in ticks(self.x, 8) {
            let x = self.px(t);
            writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{MARGIN_TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e4e4e4"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
                MARGIN_TOP + h,
                MARGIN_TOP + h + 16.0,
                label(t)
            )
            .unwrap();
        }
        for t in ticks(self.y, 6) {
            let y = self.py(t);
            writeln!(
                s,
                r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e4e4e4"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
                MARGIN_LEFT + w,
                MARGIN_LEFT - 6.0,
                y + 4.0,
                label(t)
            )
            .unwrap();
        }
        writeln!(s, r#"<g clip-path="url(#plot)">"#).unwrap();
        s.push_str(&self.body);
        writeln!(s, "</g>").unwrap();
        s.push_str(&self.overlay);
        writeln!(
            s,
            r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + w / 2.0,
            self.height - 12.0,
            escape(xlabel)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text transform="translate(16 {:.2}) rotate(-90)" font-size="12" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + h / 2.0,
            escape(ylabel)
        )
        .unwrap();
        for (k, (name, color)) in self.legend.iter().enumerate() {
            let y = MARGIN_TOP + 16.0 + 16.0 * k as f64;
            let x = MARGIN_LEFT + 10.0;
            writeln!(
                s,
                r#"<line x1="{x}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{y:.2}" font-size="11">{}</text>"#,
                y - 4.0,
                x + 18.0,
                y - 4.0,
                x + 24.0,
                escape(name)
            )
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}
