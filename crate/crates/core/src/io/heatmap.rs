//! SVG heatmap of a transport plan with marginal bar strips.
//!
//! Cell colour runs linearly from white (0) to dark blue (largest entry), so
//! colour order follows value order. Each cell also carries its exact value
//! in a `data-value` attribute. Row sums are drawn as bars to the right of
//! the grid and column sums as bars below it.

use std::fmt::Write;

use crate::uot::TransportPlan;

const CELL: f64 = 40.0;
const LABEL_SPACE: f64 = 110.0;
const BAR_SPACE: f64 = 80.0;
const PAD: f64 = 10.0;
const LOW: [f64; 3] = [255.0, 255.0, 255.0];
const HIGH: [f64; 3] = [8.0, 48.0, 107.0];
const BAR_FILL: &str = "#6b6b6b";

/// Colour for `value / max`, clamped to `[0, 1]`.
pub fn color(fraction: f64) -> String {
    let f = if fraction.is_finite() {
        fraction.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c: Vec<u8> = (0..3)
        .map(|i| (LOW[i] + f * (HIGH[i] - LOW[i])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Renders `plan`; rows are source types, columns target types. `labels`
/// must have one entry per type.
pub fn render_heatmap(plan: &TransportPlan, labels: &[String], title: &str) -> String {
    let d = plan.dim();
    assert_eq!(labels.len(), d, "one label per type");
    let grid = CELL * d as f64;
    let (x0, y0) = (PAD + LABEL_SPACE, PAD + LABEL_SPACE);
    let width = x0 + grid + PAD + BAR_SPACE + PAD;
    let height = y0 + grid + PAD + BAR_SPACE + PAD;
    let max = plan.entries().max();
    let rows = plan.row_sums();
    let cols = plan.column_sums();
    let bar_max = rows.iter().chain(&cols).copied().fold(0.0, f64::max);

    let mut s = String::new();
    // `write!` into a String cannot fail.
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    let _ = writeln!(s, r#"<g class="cells">"#);
    for j in 0..d {
        for k in 0..d {
            let v = plan.get(j, k);
            let fill = color(if max > 0.0 { v / max } else { 0.0 });
            let _ = writeln!(
                s,
                r#"<rect class="cell" data-row="{j}" data-col="{k}" data-value="{v:e}" x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="{fill}"/>"#,
                x0 + CELL * k as f64,
                y0 + CELL * j as f64,
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="labels">"#);
    for (j, name) in labels.iter().enumerate() {
        let name = escape(name);
        let _ = writeln!(
            s,
            r#"<text class="row-label" x="{}" y="{}" text-anchor="end" dominant-baseline="middle">{name}</text>"#,
            x0 - 4.0,
            y0 + CELL * (j as f64 + 0.5),
        );
        let (cx, cy) = (x0 + CELL * (j as f64 + 0.5), y0 - 4.0);
        let _ = writeln!(
            s,
            r#"<text class="col-label" x="{cx}" y="{cy}" transform="rotate(-60 {cx} {cy})">{name}</text>"#,
        );
    }
    let _ = writeln!(s, "</g>");

    let scale = |v: f64| {
        if bar_max > 0.0 {
            BAR_SPACE * v / bar_max
        } else {
            0.0
        }
    };
    let _ = writeln!(s, r#"<g class="row-marginal">"#);
    for (j, v) in rows.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<rect class="bar" data-value="{v:e}" x="{}" y="{}" width="{}" height="{}" fill="{BAR_FILL}"/>"#,
            x0 + grid + PAD,
            y0 + CELL * j as f64 + 4.0,
            scale(*v),
            CELL - 8.0,
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="col-marginal">"#);
    for (k, v) in cols.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<rect class="bar" data-value="{v:e}" x="{}" y="{}" width="{}" height="{}" fill="{BAR_FILL}"/>"#,
            x0 + CELL * k as f64 + 4.0,
            y0 + grid + PAD,
            CELL - 8.0,
            scale(*v),
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
