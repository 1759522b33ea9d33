//! Hand-rolled violin-plot SVG rendering from [`Summary`] records.
//!
//! The output is a pure function of the summaries (fixed float formatting,
//! no timestamps), so rendered files can be golden-tested byte for byte.

use mlbm_core::Summary;
use std::fmt::Write;

pub struct ViolinGroup {
    pub label: String,
    pub summary: Summary,
}

const SLOT_W: f64 = 92.0;
const MARGIN_L: f64 = 58.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 64.0;
const PLOT_H: f64 = 320.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders one panel: a violin per group, horizontal tick grid, median bar
/// and mean dot per violin, group labels below.
pub fn render_violin(title: &str, y_label: &str, groups: &[ViolinGroup]) -> String {
    let width = MARGIN_L + SLOT_W * groups.len() as f64 + MARGIN_R;
    let height = MARGIN_T + PLOT_H + MARGIN_B;

    // y-range across all KDE supports with a little padding
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for g in groups {
        for &x in &g.summary.kde_x {
            y_min = y_min.min(x);
            y_max = y_max.max(x);
        }
    }
    if !y_min.is_finite() || y_max - y_min < 1e-9 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad = 0.04 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;
    let y_of = |v: f64| MARGIN_T + PLOT_H * (1.0 - (v - y_min) / (y_max - y_min));

    let mut svg = String::new();
    let _ = writeln!(
svg,
"<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height)
    );
    let _ = writeln!(
svg,
"<rect width=\"{}\" height=\"{}\" fill=\"white\"/>",
        fmt(width),
        fmt(height)
    );
    let _ = writeln!(
svg,
"<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
        fmt(width / 2.0),
        escape(title)
    );
    let _ = writeln!(
svg,
"<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        fmt(MARGIN_T + PLOT_H / 2.0),
        fmt(MARGIN_T + PLOT_H / 2.0),
        escape(y_label)
    );

    // horizontal grid at 5 evenly spaced ticks
    for t in 0..=4 {
        let v = y_min + (y_max - y_min) * t as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
svg,
"<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\" stroke-width=\"1\"/>",
            fmt(MARGIN_L),
            fmt(y),
            fmt(width - MARGIN_R),
            fmt(y)
        );
        let _ = writeln!(
svg,
"<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            fmt(MARGIN_L - 6.0),
            fmt(y + 4.0),
            fmt(v)
        );
    }

    for (idx, g) in groups.iter().enumerate() {
        let cx = MARGIN_L + SLOT_W * (idx as f64 + 0.5);
        let max_density = g.summary.kde_y.iter().copied().fold(0.0f64, f64::max);
        let half = SLOT_W * 0.42;
        let scale = if max_density > 0.0 { half / max_density } else { 0.0 };

        // mirrored density polygon
        let mut points = String::new();
        for (x, y) in g.summary.kde_x.iter().zip(&g.summary.kde_y) {
            let _ = write!(points, "{},{} ", fmt(cx + y * scale), fmt(y_of(*x)));
        }
        for (x, y) in g.summary.kde_x.iter().zip(&g.summary.kde_y).rev() {
            let _ = write!(points, "{},{} ", fmt(cx - y * scale), fmt(y_of(*x)));
        }
        let _ = writeln!(
svg,
"<polygon points=\"{}\" fill=\"#7aa6c2\" fill-opacity=\"0.75\" stroke=\"#2b5d82\" stroke-width=\"1\"/>",
            points.trim_end()
        );

        // median bar and mean dot
        let ym = y_of(g.summary.median);
        let _ = writeln!(
svg,
"<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#1b3a52\" stroke-width=\"2\"/>",
            fmt(cx - half * 0.6),
            fmt(ym),
            fmt(cx + half * 0.6),
            fmt(ym)
        );
        let _ = writeln!(
svg,
"<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#1b3a52\"/>",
            fmt(cx),
            fmt(y_of(g.summary.mean))
        );

        let _ = writeln!(
svg,
"<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            fmt(cx),
            fmt(MARGIN_T + PLOT_H + 18.0),
            escape(&g.label)
        );
        let _ = writeln!(
svg,
"<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555555\" text-anchor=\"middle\">n={}</text>",
            fmt(cx),
            fmt(MARGIN_T + PLOT_H + 34.0),
            g.summary.count
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
