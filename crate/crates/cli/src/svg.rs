//! Minimal SVG line-plot writer. No plotting dependency: the output is a
//! fixed-size plot with one polyline, axis lines, and min/max tick labels.

use idauth_core::textio::fmt_sig;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

pub fn line_plot(points: &[(f64, f64)], title: &str, x_label: &str, y_label: &str) -> String {
    assert!(!points.is_empty());
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    let markers: String = points
        .iter()
        .map(|&(x, y)| {
            format!(
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4"/>"##,
                sx(x),
                sy(y)
            )
        })
        .collect();
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            r#"<text x="{tx}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#,
            r#"<line x1="{m}" y1="{ybase}" x2="{xmax}" y2="{ybase}" stroke="black"/>"#,
            r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{ybase}" stroke="black"/>"#,
            r#"<text x="{tx}" y="{xlab_y}" text-anchor="middle" font-family="sans-serif" font-size="12">{x_label}</text>"#,
            r#"<text x="16" y="{ty}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {ty})">{y_label}</text>"#,
            r#"<text x="{m}" y="{tick_y}" text-anchor="middle" font-family="sans-serif" font-size="10">{x0}</text>"#,
            r#"<text x="{xmax}" y="{tick_y}" text-anchor="middle" font-family="sans-serif" font-size="10">{x1}</text>"#,
            r#"<text x="{ytick_x}" y="{ybase}" text-anchor="end" font-family="sans-serif" font-size="10">{y0}</text>"#,
            r#"<text x="{ytick_x}" y="{m}" text-anchor="end" font-family="sans-serif" font-size="10">{y1}</text>"#,
            r##"<polyline points="{path}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
            "{markers}",
            "</svg>\n"
        ),
        w = W,
        h = H,
        m = MARGIN,
        tx = W / 2.0,
        ty = H / 2.0,
        ybase = H - MARGIN,
        xmax = W - MARGIN,
        xlab_y = H - 20.0,
        tick_y = H - MARGIN + 16.0,
        ytick_x = MARGIN - 6.0,
        title = title,
        x_label = x_label,
        y_label = y_label,
        x0 = fmt_sig(x0, 4),
        x1 = fmt_sig(x1, 4),
        y0 = fmt_sig(y0, 4),
        y1 = fmt_sig(y1, 4),
        path = path.join(" "),
        markers = markers,
    )
}

#[cfg(test)]
mod tests {
    use super::line_plot;

    #[test]
    fn produces_wellformed_svg() {
        let svg = line_plot(&[(4.0, 0.3), (6.0, 0.1), (8.0, 0.05)], "t", "n", "err");
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
