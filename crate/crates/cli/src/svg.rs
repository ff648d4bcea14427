use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1e-300) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Single-series line plot with labelled axis extremes.
pub fn line_plot(x: &[f64], y: &[f64], x_label: &str, y_label: &str) -> String {
    let (x0, x1) = range(x);
    let (y0, y1) = range(y);
    let w = WIDTH - 2.0 * MARGIN;
    let h = HEIGHT - 2.0 * MARGIN;
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * w;
    let py = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * h;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    let text = |s: &mut String, x: f64, y: f64, anchor: &str, body: &str| {
        writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{body}</text>"#
        )
        .unwrap();
    };
    text(
        &mut s,
        MARGIN,
        HEIGHT - MARGIN + 16.0,
        "start",
        &format!("{x0:.4e}"),
    );
    text(
        &mut s,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        "end",
        &format!("{x1:.4e}"),
    );
    text(
        &mut s,
        MARGIN - 4.0,
        HEIGHT - MARGIN,
        "end",
        &format!("{y0:.4e}"),
    );
    text(
        &mut s,
        MARGIN - 4.0,
        MARGIN + 4.0,
        "end",
        &format!("{y1:.4e}"),
    );
    text(
        &mut s,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        "middle",
        &escape(x_label),
    );
    text(
        &mut s,
        WIDTH / 2.0,
        MARGIN - 20.0,
        "middle",
        &escape(y_label),
    );

    s.push_str(r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points=""#);
    for (k, (&a, &b)) in x.iter().zip(y).enumerate() {
        if k > 0 {
            s.push(' ');
        }
        write!(s, "{:.2},{:.2}", px(a), py(b)).unwrap();
    }
    s.push_str("\"/>\n</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_spans_the_plot_area() {
        let svg = line_plot(&[0.0, 1.0, 2.0], &[1.0, 3.0, 2.0], "t_s", "n3_y_m");
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("points=\"60.00,340.00 320.00,60.00 580.00,200.00\""));
        assert!(svg.contains(">n3_y_m<"));
    }

    #[test]
    fn constant_series_is_centred() {
        let svg = line_plot(&[0.0, 1.0], &[2.0, 2.0], "t", "y");
        assert!(svg.contains("60.00,200.00 580.00,200.00"));
    }
}
