//! Minimal SVG line plots with no plotting dependency. Output bytes are a
//! pure function of the input: fixed canvas, fixed tick logic, fixed
//! number formatting.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 6] = [
    "#d95f02", "#1b9e77", "#7570b3", "#e7298a", "#66a61e", "#e6ab02",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Extra caption under the title (e.g. a fitted slope).
    pub annotation: String,
}

impl LinePlot {
    pub fn render(&self) -> String {
        let mut finite_points: Vec<(f64, f64)> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                let (x, y) = self.transform(x, y);
                if x.is_finite() && y.is_finite() {
                    finite_points.push((x, y));
                }
            }
        }
        let (x_min, x_max) = axis_range(finite_points.iter().map(|p| p.0));
        let (y_min, y_max) = axis_range(finite_points.iter().map(|p| p.1));

        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = move |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
        let sy = move |y: f64| MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="22" font-family="monospace" font-size="16">{}</text>"#,
            MARGIN_LEFT,
            escape(&self.title)
        );
        if !self.annotation.is_empty() {
            let _ = writeln!(
                out,
                r##"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="12" fill="#555555">{}</text>"##,
                MARGIN_LEFT,
                MARGIN_TOP - 4.0,
                escape(&self.annotation)
            );
        }

        // Frame.
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            MARGIN_LEFT, MARGIN_TOP, plot_w, plot_h
        );

        // Ticks: five per axis in the transformed coordinates.
        for k in 0..=4 {
            let fx = x_min + (x_max - x_min) * k as f64 / 4.0;
            let px = sx(fx);
            let _ = writeln!(
                out,
                r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#,
                MARGIN_TOP + plot_h,
                MARGIN_TOP + plot_h + 5.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{px:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="middle">{}</text>"#,
                MARGIN_TOP + plot_h + 18.0,
                tick_label(fx, self.log_x)
            );
            let fy = y_min + (y_max - y_min) * k as f64 / 4.0;
            let py = sy(fy);
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="black"/>"#,
                MARGIN_LEFT - 5.0,
                MARGIN_LEFT
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 8.0,
                py + 4.0,
                tick_label(fy, self.log_y)
            );
        }

        // Axis labels.
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="13" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.1}" font-family="monospace" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        // Series polylines and legend.
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut path = String::new();
            for &(x, y) in &series.points {
                let (tx, ty) = self.transform(x, y);
                if !(tx.is_finite() && ty.is_finite()) {
                    continue;
                }
                let _ = write!(path, "{:.2},{:.2} ", sx(tx), sy(ty));
            }
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.trim_end()
            );
            let ly = MARGIN_TOP + 16.0 * (i as f64 + 1.0);
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
                WIDTH - MARGIN_RIGHT + 10.0,
                WIDTH - MARGIN_RIGHT + 34.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11">{}</text>"#,
                WIDTH - MARGIN_RIGHT + 40.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }

    fn transform(&self, x: f64, y: f64) -> (f64, f64) {
        let tx = if self.log_x { x.log10() } else { x };
        let ty = if self.log_y { y.log10() } else { y };
        (tx, ty)
    }
}

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn tick_label(transformed: f64, log: bool) -> String {
    if log {
        format!("1e{transformed:.1}")
    } else {
        format!("{transformed:.3}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot() -> LinePlot {
        LinePlot {
            title: "demo".into(),
            x_label: "step".into(),
            y_label: "value".into(),
            log_x: true,
            log_y: true,
            annotation: "slope -0.25".into(),
            series: vec![Series {
                name: "run".into(),
                points: (1..100).map(|m| (m as f64, (m as f64).powf(-0.25))).collect(),
            }],
        }
    }

    #[test]
    fn render_is_deterministic() {
        assert_eq!(plot().render(), plot().render());
    }

    #[test]
    fn render_contains_polyline_and_labels() {
        let svg = plot().render();
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("slope -0.25"));
        assert!(svg.contains("</svg>"));
    }
}
