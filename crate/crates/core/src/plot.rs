//! Static SVG rendering of precision-recall curves.
//!
//! Output is plain hand-assembled SVG with fixed-precision coordinates,
//! so identical inputs render identical bytes. The axes follow the
//! matching-evaluation convention: x is 1 − precision, y is recall, both
//! on [0, 1].

use crate::evaluation::PRPoint;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 62.0;
const RIGHT: f64 = 464.0;
const TOP: f64 = 34.0;
const BOTTOM: f64 = 318.0;

/// Stable color per policy label; unknown labels share a fallback.
pub fn policy_color(label: &str) -> &'static str {
    match label {
        "none" => "#7f7f7f",
        "lowe" => "#1f77b4",
        "mc-exact" => "#2ca02c",
        "mc-approx" => "#d62728",
        _ => "#9467bd",
    }
}

fn x_pos(one_minus_precision: f64) -> f64 {
    LEFT + one_minus_precision.clamp(0.0, 1.0) * (RIGHT - LEFT)
}

fn y_pos(recall: f64) -> f64 {
    BOTTOM - recall.clamp(0.0, 1.0) * (BOTTOM - TOP)
}

/// Renders one figure holding a (1 − precision, recall) polyline per
/// labeled series.
pub fn pr_svg(title: &str, series: &[(String, Vec<PRPoint>)]) -> String {
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        escape(title)
    ));

    // Grid and ticks at 0.2 steps.
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let x = x_pos(f);
        let y = y_pos(f);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{TOP:.1}\" x2=\"{x:.1}\" y2=\"{BOTTOM:.1}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
        ));
        svg.push_str(&format!(
            "<line x1=\"{LEFT:.1}\" y1=\"{y:.1}\" x2=\"{RIGHT:.1}\" y2=\"{y:.1}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{f:.1}</text>\n",
            BOTTOM + 14.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"end\">{f:.1}</text>\n",
            LEFT - 6.0,
            y + 3.5
        ));
    }
    svg.push_str(&format!(
        "<rect x=\"{LEFT:.1}\" y=\"{TOP:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
         stroke=\"#333333\" stroke-width=\"1\"/>\n",
        RIGHT - LEFT,
        BOTTOM - TOP
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
         text-anchor=\"middle\">1 - precision</text>\n",
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 32.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">recall</text>\n",
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0
    ));

    for (i, (label, points)) in series.iter().enumerate() {
        let color = policy_color(label);
        if !points.is_empty() {
            let path: Vec<String> = points
                .iter()
                .map(|p| format!("{:.2},{:.2}", x_pos(p.one_minus_precision), y_pos(p.recall)))
                .collect();
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
                 points=\"{}\"/>\n",
                path.join(" ")
            ));
        }
        // Legend swatches stack below the top-left corner of the frame.
        let ly = TOP + 14.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            LEFT + 8.0,
            LEFT + 28.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
            LEFT + 33.0,
            ly + 3.5,
            escape(label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(recall: f64, omp: f64, t: f64) -> PRPoint {
        PRPoint { recall, one_minus_precision: omp, threshold: t }
    }

    #[test]
    fn svg_is_deterministic_and_well_formed() {
        let series = vec![
            ("lowe".to_string(), vec![point(0.0, 1.0, 0.1), point(0.8, 0.1, 0.9)]),
            ("mc-approx".to_string(), vec![point(0.0, 1.0, 0.1), point(0.9, 0.05, 0.9)]),
        ];
        let a = pr_svg("wall 1-2", &series);
        let b = pr_svg("wall 1-2", &series);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.contains("#1f77b4"));
        assert!(a.contains("#d62728"));
        assert!(a.contains("wall 1-2"));
    }

    #[test]
    fn titles_are_escaped() {
        let svg = pr_svg("a<b&c>", &[]);
        assert!(svg.contains("a&lt;b&amp;c&gt;"));
        assert!(!svg.contains("a<b"));
    }

    #[test]
    fn out_of_range_points_are_clamped_into_the_frame() {
        let series =
            vec![("none".to_string(), vec![point(-0.5, 2.0, 0.0), point(1.5, -1.0, 1.0)])];
        let svg = pr_svg("clamp", &series);
        assert!(svg.contains(&format!("{:.2},{:.2}", x_pos(1.0), y_pos(0.0))));
        assert!(svg.contains(&format!("{:.2},{:.2}", x_pos(0.0), y_pos(1.0))));
    }
}
