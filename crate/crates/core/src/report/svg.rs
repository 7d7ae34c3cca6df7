use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

/// Issue colors, cycled when there are more series.
pub const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Marker shapes, cycled per channel.
pub const SHAPES: &[&str] = &["circle", "square", "triangle", "diamond", "cross"];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub fn shape(i: usize) -> &'static str {
    SHAPES[i % SHAPES.len()]
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = WIDTH,
            h = HEIGHT
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
            f(WIDTH / 2.0),
            escape(title)
        );
        Canvas { out }
    }

    fn plot_w(&self) -> f64 {
        WIDTH - LEFT - RIGHT
    }

    fn plot_h(&self) -> f64 {
        HEIGHT - TOP - BOTTOM
    }

    fn axes(&mut self, y_label: &str) {
        let (x0, y0) = (LEFT, HEIGHT - BOTTOM);
        let _ = writeln!(
            self.out,
            r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
            f(LEFT + self.plot_w())
        );
        let _ = writeln!(
            self.out,
            r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{TOP}" stroke="black"/>"#
        );
        let _ = writeln!(
            self.out,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            f(TOP + self.plot_h() / 2.0),
            f(TOP + self.plot_h() / 2.0),
            escape(y_label)
        );
    }

    fn no_data(&mut self) {
        let _ = writeln!(
            self.out,
            r#"<text class="no-data" x="{}" y="{}" text-anchor="middle" fill="gray">no data</text>"#,
            f(LEFT + self.plot_w() / 2.0),
            f(TOP + self.plot_h() / 2.0)
        );
    }

    fn y_ticks(&mut self, max: u64) {
        let steps = 5;
        for s in 0..=steps {
            let v = max as f64 * s as f64 / steps as f64;
            let y = HEIGHT - BOTTOM - self.plot_h() * s as f64 / steps as f64;
            let _ = writeln!(
                self.out,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                f(LEFT - 6.0),
                f(y + 4.0),
                f(v).trim_end_matches('0').trim_end_matches('.')
            );
        }
    }

    fn legend(&mut self, entries: &[(String, String)]) {
        for (i, (label, swatch)) in entries.iter().enumerate() {
            let y = TOP + 18.0 * i as f64;
            let x = WIDTH - RIGHT + 20.0;
            let _ = writeln!(self.out, "{swatch_el}", swatch_el = swatch_at(swatch, x, y));
            let _ = writeln!(
                self.out,
                r#"<text x="{}" y="{}">{}</text>"#,
                f(x + 14.0),
                f(y + 4.0),
                escape(label)
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn swatch_at(spec: &str, x: f64, y: f64) -> String {
    match spec.split_once(':') {
        Some(("shape", s)) => marker(s, x, y, 5.0, "black", "legend-marker"),
        _ => format!(
            r#"<rect class="legend-swatch" x="{}" y="{}" width="10" height="10" fill="{spec}"/>"#,
            f(x - 5.0),
            f(y - 5.0)
        ),
    }
}

/// One scatter marker; every shape has its own element type or path.
pub fn marker(shape: &str, x: f64, y: f64, r: f64, fill: &str, class: &str) -> String {
    match shape {
        "circle" => format!(
            r#"<circle class="{class} marker-circle" cx="{}" cy="{}" r="{}" fill="{fill}"/>"#,
            f(x),
            f(y),
            f(r)
        ),
        "square" => format!(
            r#"<rect class="{class} marker-square" x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
            f(x - r),
            f(y - r),
            f(2.0 * r),
            f(2.0 * r)
        ),
        "triangle" => format!(
            r#"<polygon class="{class} marker-triangle" points="{},{} {},{} {},{}" fill="{fill}"/>"#,
            f(x),
            f(y - r),
            f(x - r),
            f(y + r),
            f(x + r),
            f(y + r)
        ),
        "diamond" => format!(
            r#"<polygon class="{class} marker-diamond" points="{},{} {},{} {},{} {},{}" fill="{fill}"/>"#,
            f(x),
            f(y - r),
            f(x + r),
            f(y),
            f(x),
            f(y + r),
            f(x - r),
            f(y)
        ),
        _ => format!(
            r#"<path class="{class} marker-cross" d="M{} {}L{} {}M{} {}L{} {}" stroke="{fill}" stroke-width="2"/>"#,
            f(x - r),
            f(y - r),
            f(x + r),
            f(y + r),
            f(x - r),
            f(y + r),
            f(x + r),
            f(y - r)
        ),
    }
}

/// Vertical bars, one per category.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], values: &[u64]) -> String {
    grouped_bar_chart(
        title,
        y_label,
        categories,
        &[(String::new(), values.to_vec())],
    )
}

/// Bars grouped by `groups`, one bar per series within each group.
/// A single unnamed series gets per-category colors and no legend.
pub fn grouped_bar_chart(title: &str, y_label: &str, groups: &[String], series: &[(String, Vec<u64>)]) -> String {
    let mut c = Canvas::new(title);
    c.axes(y_label);
    let max = series.iter().flat_map(|(_, v)| v.iter().copied()).max().unwrap_or(0);
    if groups.is_empty() || max == 0 {
        c.no_data();
        return c.finish();
    }
    c.y_ticks(max);
    let single = series.len() == 1 && series[0].0.is_empty();
    let group_w = c.plot_w() / groups.len() as f64;
    let bar_w = group_w * 0.8 / series.len() as f64;
    for (g, name) in groups.iter().enumerate() {
        let gx = LEFT + group_w * g as f64;
        for (s, (_, values)) in series.iter().enumerate() {
            let v = values.get(g).copied().unwrap_or(0);
            let h = c.plot_h() * v as f64 / max as f64;
            let fill = if single { color(g) } else { color(s) };
            let _ = writeln!(
                c.out,
                r#"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="{fill}"><title>{}: {v}</title></rect>"#,
                f(gx + group_w * 0.1 + bar_w * s as f64),
                f(HEIGHT - BOTTOM - h),
                f(bar_w),
                f(h),
                escape(name)
            );
        }
        let _ = writeln!(
            c.out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            f(gx + group_w / 2.0),
            f(HEIGHT - BOTTOM + 18.0),
            escape(name)
        );
    }
    if !single {
        let entries: Vec<(String, String)> = series
            .iter()
            .enumerate()
            .map(|(i, (n, _))| (n.clone(), color(i).to_string()))
            .collect();
        c.legend(&entries);
    }
    c.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    /// Color index; `None` draws the point gray.
    pub color: Option<usize>,
    pub shape: usize,
}

/// Scatter plot with per-point color and marker shape.
pub fn scatter(title: &str, points: &[ScatterPoint], color_names: &[String], shape_names: &[String]) -> String {
    let mut c = Canvas::new(title);
    c.axes("");
    if points.is_empty() {
        c.no_data();
        return c.finish();
    }
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x_lo = x_lo.min(p.x);
        x_hi = x_hi.max(p.x);
        y_lo = y_lo.min(p.y);
        y_hi = y_hi.max(p.y);
    }
    let sx = if x_hi > x_lo { (c.plot_w() - 20.0) / (x_hi - x_lo) } else { 0.0 };
    let sy = if y_hi > y_lo { (c.plot_h() - 20.0) / (y_hi - y_lo) } else { 0.0 };
    for p in points {
        let px = LEFT + 10.0 + (p.x - x_lo) * sx;
        let py = HEIGHT - BOTTOM - 10.0 - (p.y - y_lo) * sy;
        let fill = p.color.map_or("#bbbbbb", color);
        let _ = writeln!(c.out, "{}", marker(shape(p.shape), px, py, 3.0, fill, "marker"));
    }
    let mut entries: Vec<(String, String)> = color_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), color(i).to_string()))
        .collect();
    entries.extend(
        shape_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), format!("shape:{}", shape(i)))),
    );
    c.legend(&entries);
    c.finish()
}
