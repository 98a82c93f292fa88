//! Minimal self-contained SVG charts. Output depends only on the data, so
//! reruns produce identical files.

use std::fmt::Write;

pub const PALETTE: [&str; 14] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Rounded coordinates keep files small and stable.
fn c(v: f64) -> String {
    format!("{:.2}", v)
}

/// Tick positions at 1, 2 or 5 times a power of ten.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

#[derive(Debug, Clone)]
pub enum Mark {
    Line {
        label: String,
        points: Vec<(f64, f64)>,
        color: String,
        width: f64,
        dashed: bool,
    },
    Points {
        label: String,
        points: Vec<(f64, f64)>,
        color: String,
        radius: f64,
        /// Text drawn next to each point.
        tags: Vec<String>,
    },
    Band {
        label: String,
        upper: Vec<(f64, f64)>,
        lower: Vec<(f64, f64)>,
        color: String,
    },
}

impl Mark {
    fn coords(&self) -> Box<dyn Iterator<Item = &(f64, f64)> + '_> {
        match self {
            Mark::Line { points, .. } | Mark::Points { points, .. } => Box::new(points.iter()),
            Mark::Band { upper, lower, .. } => Box::new(upper.iter().chain(lower.iter())),
        }
    }

    fn legend(&self) -> Option<(&str, &str)> {
        let (l, col) = match self {
            Mark::Line { label, color, .. }
            | Mark::Points { label, color, .. }
            | Mark::Band { label, color, .. } => (label, color),
        };
        (!l.is_empty()).then_some((l.as_str(), col.as_str()))
    }
}

pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>, color: &str, width: f64) -> Mark {
    Mark::Line {
        label: label.into(),
        points,
        color: color.into(),
        width,
        dashed: false,
    }
}

/// A chart with linear axes. `x_labels` replaces numeric x tick labels, e.g.
/// with dates, as `(x, text)` pairs.
#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: f64,
    pub height: f64,
    pub marks: Vec<Mark>,
    pub x_labels: Option<Vec<(f64, String)>>,
    pub legend: bool,
}

impl Chart {
    pub fn new(title: impl Into<String>, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            width: 900.0,
            height: 520.0,
            marks: Vec::new(),
            x_labels: None,
            legend: true,
        }
    }

    pub fn push(&mut self, m: Mark) -> &mut Self {
        self.marks.push(m);
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for (x, y) in self.marks.iter().flat_map(|m| m.coords()) {
            if x.is_finite() && y.is_finite() {
                b = (b.0.min(*x), b.1.max(*x), b.2.min(*y), b.3.max(*y));
            }
        }
        if !b.0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            if hi > lo {
                let p = 0.04 * (hi - lo);
                (lo - p, hi + p)
            } else {
                let p = lo.abs().max(1.0) * 0.05;
                (lo - p, hi + p)
            }
        };
        let (x0, x1) = pad(b.0, b.1);
        let (y0, y1) = pad(b.2, b.3);
        (x0, x1, y0, y1)
    }

    /// The chart as an `<svg>` element placed at `(ox, oy)`.
    pub fn render_at(&self, ox: f64, oy: f64) -> String {
        let (left, right, top, bottom) = (72.0, if self.legend { 150.0 } else { 20.0 }, 36.0, 52.0);
        let pw = self.width - left - right;
        let ph = self.height - top - bottom;
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg x="{}" y="{}" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
            c(ox),
            c(oy),
            c(self.width),
            c(self.height)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="white" stroke="#444"/>"##,
            c(left),
            c(top),
            c(pw),
            c(ph)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            c(left + pw / 2.0),
            esc(&self.title)
        );
        for y in nice_ticks(y0, y1, 6) {
            let py = sy(y);
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
                c(left),
                c(py),
                c(left + pw),
                c(py),
                c(left - 6.0),
                c(py + 4.0),
                tick_label(y)
            );
        }
        let xt: Vec<(f64, String)> = match &self.x_labels {
            Some(l) => l.clone(),
            None => nice_ticks(x0, x1, 8)
                .into_iter()
                .map(|x| (x, tick_label(x)))
                .collect(),
        };
        for (x, text) in xt {
            if !(x0..=x1).contains(&x) {
                continue;
            }
            let px = sx(x);
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="middle">{}</text>"##,
                c(px),
                c(top),
                c(px),
                c(top + ph),
                c(px),
                c(top + ph + 16.0),
                esc(&text)
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999"/>"##,
                c(left),
                c(sy(0.0)),
                c(left + pw),
                c(sy(0.0))
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            c(left + pw / 2.0),
            c(self.height - 10.0),
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            c(top + ph / 2.0),
            c(top + ph / 2.0),
            esc(&self.y_label)
        );
        for m in &self.marks {
            match m {
                Mark::Band {
                    upper,
                    lower,
                    color,
                    ..
                } => {
                    let mut d = String::new();
                    for (i, (x, y)) in upper.iter().chain(lower.iter().rev()).enumerate() {
                        let _ = write!(
                            d,
                            "{}{},{} ",
                            if i == 0 { "M" } else { "L" },
                            c(sx(*x)),
                            c(sy(*y))
                        );
                    }
                    let _ = writeln!(
                        s,
                        r#"<path d="{}Z" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
                        d, color
                    );
                }
                Mark::Line {
                    points,
                    color,
                    width,
                    dashed,
                    ..
                } => {
                    let pts: Vec<String> = points
                        .iter()
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .map(|(x, y)| format!("{},{}", c(sx(*x)), c(sy(*y))))
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="{}"{}/>"#,
                        pts.join(" "),
                        color,
                        width,
                        if *dashed {
                            r#" stroke-dasharray="6 4""#
                        } else {
                            ""
                        }
                    );
                }
                Mark::Points {
                    points,
                    color,
                    radius,
                    tags,
                    ..
                } => {
                    for (i, (x, y)) in points.iter().enumerate() {
                        if !(x.is_finite() && y.is_finite()) {
                            continue;
                        }
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{}" cy="{}" r="{}" fill="{}"/>"#,
                            c(sx(*x)),
                            c(sy(*y)),
                            radius,
                            color
                        );
                        if let Some(t) = tags.get(i) {
                            let _ = writeln!(
                                s,
                                r#"<text x="{}" y="{}" font-size="9">{}</text>"#,
                                c(sx(*x) + radius + 2.0),
                                c(sy(*y) - 2.0),
                                esc(t)
                            );
                        }
                    }
                }
            }
        }
        if self.legend {
            let lx = left + pw + 12.0;
            for (i, (label, col)) in self.marks.iter().filter_map(|m| m.legend()).enumerate() {
                let ly = top + 8.0 + 16.0 * i as f64;
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="12" height="8" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                    c(lx),
                    c(ly - 7.0),
                    col,
                    c(lx + 16.0),
                    c(ly + 1.0),
                    esc(label)
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn to_svg(&self) -> String {
        document(self.width, self.height, &self.render_at(0.0, 0.0))
    }
}

pub fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n{}</svg>\n",
        c(width),
        c(height),
        c(width),
        c(height),
        body
    )
}

/// Charts laid out row by row, `cols` per row.
pub fn grid(charts: &[Chart], cols: usize) -> String {
    let cols = cols.max(1);
    let w = charts.iter().map(|c| c.width).fold(0.0, f64::max);
    let h = charts.iter().map(|c| c.height).fold(0.0, f64::max);
    let rows = charts.len().div_ceil(cols);
    let mut body = String::new();
    for (i, ch) in charts.iter().enumerate() {
        body.push_str(&ch.render_at((i % cols) as f64 * w, (i / cols) as f64 * h));
    }
    document(w * cols as f64, h * rows.max(1) as f64, &body)
}

/// Grouped vertical bars: one group per category, one bar per series.
pub fn grouped_bars(
    title: &str,
    categories: &[String],
    series: &[(String, Vec<f64>)],
    y_label: &str,
) -> String {
    let (left, right, top, bottom) = (72.0, 140.0, 36.0, 90.0);
    let group_w = 18.0 * series.len().max(1) as f64 + 14.0;
    let pw = (group_w * categories.len() as f64).max(300.0);
    let ph = 360.0;
    let width = left + pw + right;
    let height = top + ph + bottom;
    let vals: Vec<f64> = series
        .iter()
        .flat_map(|s| s.1.iter().copied())
        .filter(|v| v.is_finite())
        .collect();
    let lo = vals.iter().copied().fold(0.0, f64::min);
    let hi = vals.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    };
    let span = hi - lo;
    let (lo, hi) = (lo - 0.05 * span * (lo < 0.0) as u8 as f64, hi + 0.05 * span);
    let sy = |y: f64| top + ph - (y - lo) / (hi - lo) * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        c(left + pw / 2.0),
        esc(title)
    );
    let _ = writeln!(
        s,
        r##"<g font-family="sans-serif" font-size="11"><rect x="{}" y="{}" width="{}" height="{}" fill="white" stroke="#444"/>"##,
        c(left),
        c(top),
        c(pw),
        c(ph)
    );
    for y in nice_ticks(lo, hi, 6) {
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
            c(left),
            c(sy(y)),
            c(left + pw),
            c(sy(y)),
            c(left - 6.0),
            c(sy(y) + 4.0),
            tick_label(y)
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#444"/>"##,
        c(left),
        c(sy(0.0)),
        c(left + pw),
        c(sy(0.0))
    );
    let gw = pw / categories.len().max(1) as f64;
    let bw = (gw - 14.0) / series.len().max(1) as f64;
    for (g, cat) in categories.iter().enumerate() {
        let gx = left + g as f64 * gw + 7.0;
        for (k, (_, v)) in series.iter().enumerate() {
            let Some(v) = v.get(g).copied().filter(|v| v.is_finite()) else {
                continue;
            };
            let (y_top, y_bot) = if v >= 0.0 {
                (sy(v), sy(0.0))
            } else {
                (sy(0.0), sy(v))
            };
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                c(gx + k as f64 * bw),
                c(y_top),
                c(bw),
                c(y_bot - y_top),
                color(k)
            );
        }
        let tx = gx + (gw - 14.0) / 2.0;
        let ty = top + ph + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" transform="rotate(-45 {} {})">{}</text>"#,
            c(tx),
            c(ty),
            c(tx),
            c(ty),
            esc(cat)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        c(top + ph / 2.0),
        c(top + ph / 2.0),
        esc(y_label)
    );
    for (k, (name, _)) in series.iter().enumerate() {
        let ly = top + 8.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="12" height="8" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            c(left + pw + 12.0),
            c(ly - 7.0),
            color(k),
            c(left + pw + 28.0),
            c(ly + 1.0),
            esc(name)
        );
    }
    s.push_str("</g>\n");
    document(width, height, &s)
}
