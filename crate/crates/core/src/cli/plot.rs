//! Minimal SVG line charts: one series, a horizontal threshold, shaded labeled seconds.

use std::fmt::Write as _;

pub struct ChartSpec<'a> {
    pub title: &'a str,
    /// Absolute second of `values[0]`.
    pub x0: usize,
    /// `None` breaks the line.
    pub values: &'a [Option<f64>],
    pub threshold: Option<f64>,
    /// Labeled (attack) seconds, aligned with `values`.
    pub labels: &'a [bool],
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 320.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn svg_line_chart(spec: &ChartSpec) -> String {
    let n = spec.values.len().max(1);
    let defined = spec.values.iter().flatten().copied();
    let mut lo = defined.clone().fold(0.0f64, f64::min);
    let mut hi = defined.fold(0.0f64, f64::max);
    if let Some(t) = spec.threshold.filter(|t| t.is_finite()) {
        lo = lo.min(t);
        hi = hi.max(t);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    hi += 0.05 * (hi - lo);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let step = plot_w / n as f64;
    let sx = |i: usize| LEFT + (i as f64 + 0.5) * step;
    let sy = |v: f64| TOP + plot_h * (1.0 - (v - lo) / (hi - lo));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(spec.title)
    );
    for (i, _) in spec.labels.iter().enumerate().filter(|(_, &l)| l) {
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{TOP}" width="{:.2}" height="{plot_h}" fill="#e74c3c" fill-opacity="0.2"/>"##,
            LEFT + i as f64 * step,
            step
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
            LEFT - 5.0,
            y + 4.0,
            v
        );
    }
    for k in 0..=5 {
        let i = (n - 1) * k / 5;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(i),
            HEIGHT - BOTTOM + 16.0,
            spec.x0 + i
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">second</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 6.0
    );

    let mut segment: Vec<String> = Vec::new();
    let flush = |segment: &mut Vec<String>, svg: &mut String| {
        if !segment.is_empty() {
            let _ = writeln!(
                svg,
                r##"<polyline fill="none" stroke="#2c3e50" stroke-width="1.2" points="{}"/>"##,
                segment.join(" ")
            );
            segment.clear();
        }
    };
    for (i, v) in spec.values.iter().enumerate() {
        match v {
            Some(v) if v.is_finite() => segment.push(format!("{:.2},{:.2}", sx(i), sy(*v))),
            _ => flush(&mut segment, &mut svg),
        }
    }
    flush(&mut segment, &mut svg);

    if let Some(t) = spec.threshold.filter(|t| t.is_finite()) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#c0392b" stroke-width="1.5"/>"##,
            LEFT + plot_w
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_structure() {
        let values = [None, Some(1.0), Some(3.0), None, Some(2.0)];
        let labels = [false, false, true, false, false];
        let svg = svg_line_chart(&ChartSpec {
            title: "a < b",
            x0: 100,
            values: &values,
            threshold: Some(2.5),
            labels: &labels,
        });
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<line ").count(), 1);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains(">100<"));
    }

    #[test]
    fn empty_and_flat_inputs() {
        let svg = svg_line_chart(&ChartSpec {
            title: "",
            x0: 0,
            values: &[Some(0.0); 3],
            threshold: None,
            labels: &[false; 3],
        });
        assert!(!svg.contains("NaN"));
        let svg = svg_line_chart(&ChartSpec {
            title: "",
            x0: 0,
            values: &[],
            threshold: Some(1.0),
            labels: &[],
        });
        assert!(svg.contains("</svg>"));
    }
}
