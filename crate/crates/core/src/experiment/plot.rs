use std::fmt::Write as _;


const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    /// Bounds of the finite points; the unit square when there are none.
    fn fit(series: &[Series]) -> Self {
        let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for &(px, py) in pts {
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(py), y.1.max(py));
        }
        if !x.0.is_finite() {
            return Self { x: (0.0, 1.0), y: (0.0, 1.0) };
        }
        let pad = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(svg: &mut String, frame: &Frame, title: &str, x_label: &str) {
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = write!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = write!(svg, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
    for (v, anchor, x, y) in [
        (frame.x.0, "start", l, b + 16.0),
        (frame.x.1, "end", r, b + 16.0),
        (frame.y.0, "end", l - 4.0, b),
        (frame.y.1, "end", l - 4.0, t + 10.0),
    ] {
        let _ = write!(svg, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4}</text>"#);
    }
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
}

fn legend(svg: &mut String, series: &[Series]) {
    for (k, s) in series.iter().enumerate() {
        let y = MARGIN + 14.0 + 16.0 * k as f64;
        let x = WIDTH - MARGIN - 150.0;
        let c = PALETTE[k % PALETTE.len()];
        let _ = write!(svg, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{c}"/>"#, y - 9.0);
        let _ = write!(svg, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(&s.name));
    }
}

/// One polyline per series with at least one finite point; non-finite
/// points are skipped.
pub fn line_plot_svg(series: &[Series], title: &str, x_label: &str) -> String {
    let frame = Frame::fit(series);
    let mut svg = String::new();
    open(&mut svg, &frame, title, x_label);
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = write!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[k % PALETTE.len()],
            pts.join(" ")
        );
    }
    legend(&mut svg, series);
    svg.push_str("</svg>\n");
    svg
}

/// One dot cloud per series.
pub fn scatter_svg(series: &[Series], title: &str) -> String {
    let frame = Frame::fit(series);
    let mut svg = String::new();
    open(&mut svg, &frame, title, "");
    for (k, s) in series.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        for &(x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = write!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{c}" fill-opacity="0.6"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
    }
    legend(&mut svg, series);
    svg.push_str("</svg>\n");
    svg
}
