//! CSV and SVG rendering for eval summaries and Pareto scatters. Output is
//! deterministic: same inputs, same bytes.

use std::fmt::Write as _;
use std::path::Path;

use super::{ParetoPoint, Summary};
use crate::Result;

pub const CSV_HEADER: [&str; 5] = [
    "model",
    "benchmark",
    "accuracy",
    "mean_latency_ms",
    "mean_output_tokens",
];

/// One CSV over any number of models: a row per (model, benchmark).
pub fn render_csv(entries: &[(&str, &Summary)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)
        .map_err(|e| crate::Error::Input(e.to_string()))?;
    for (model, summary) in entries {
        for b in &summary.benchmarks {
            let (acc, lat, tok) = (
                b.accuracy.to_string(),
                b.mean_latency_ms.to_string(),
                b.mean_output_tokens.to_string(),
            );
            w.write_record([*model, &b.benchmark, &acc, &lat, &tok])
                .map_err(|e| crate::Error::Input(e.to_string()))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn x_scale(cost: f64, min: f64, max: f64) -> f64 {
    let span = max - min;
    let plot_w = SVG_W - MARGIN_LEFT - MARGIN_RIGHT;
    if span == 0.0 {
        MARGIN_LEFT + plot_w / 2.0
    } else {
        MARGIN_LEFT + (cost - min) / span * plot_w
    }
}

fn y_scale(accuracy: f64) -> f64 {
    let plot_h = SVG_H - MARGIN_TOP - MARGIN_BOTTOM;
    MARGIN_TOP + (100.0 - accuracy) / 100.0 * plot_h
}

/// Scatter of accuracy vs cost; frontier points get a ring marker and a
/// connecting polyline. `frontier` holds indices into `points` as returned
/// by [`super::compute_pareto`].
pub fn render_svg(points: &[ParetoPoint], frontier: &[usize], cost_label: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(
        svg,
        r#"  <rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="white"/>"#
    );
    let (x0, y0, x1, y1) = (
        MARGIN_LEFT,
        SVG_H - MARGIN_BOTTOM,
        SVG_W - MARGIN_RIGHT,
        MARGIN_TOP,
    );
    let _ = writeln!(
        svg,
        r#"  <line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"  <line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
        (x0 + x1) / 2.0,
        SVG_H - 15.0,
        xml_escape(cost_label)
    );
    let _ = writeln!(
        svg,
        r#"  <text x="18" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {:.2})">accuracy (%)</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    for acc in [0.0, 50.0, 100.0] {
        let _ = writeln!(
            svg,
            r#"  <text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"#,
            x0 - 6.0,
            y_scale(acc) + 4.0,
            acc
        );
    }

    if points.is_empty() {
        let _ = writeln!(
            svg,
            r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">no data</text>"#,
            (x0 + x1) / 2.0,
            (y0 + y1) / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    let min_cost = points.iter().map(|p| p.cost).fold(f64::INFINITY, f64::min);
    let max_cost = points.iter().map(|p| p.cost).fold(f64::NEG_INFINITY, f64::max);
    for (cost, anchor) in [(min_cost, "start"), (max_cost, "end")] {
        let _ = writeln!(
            svg,
            r#"  <text x="{:.2}" y="{:.2}" text-anchor="{anchor}" font-size="11">{cost}</text>"#,
            x_scale(cost, min_cost, max_cost),
            y0 + 16.0
        );
    }

    if frontier.len() > 1 {
        let path: Vec<String> = frontier
            .iter()
            .map(|&i| {
                format!(
                    "{:.2},{:.2}",
                    x_scale(points[i].cost, min_cost, max_cost),
                    y_scale(points[i].accuracy)
                )
            })
            .collect();
        let _ = writeln!(
            svg,
            r##"  <polyline points="{}" fill="none" stroke="#c22" stroke-width="1.5"/>"##,
            path.join(" ")
        );
    }
    for (i, p) in points.iter().enumerate() {
        let cx = x_scale(p.cost, min_cost, max_cost);
        let cy = y_scale(p.accuracy);
        let _ = writeln!(
            svg,
            r##"  <circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="#555"/>"##
        );
        if frontier.contains(&i) {
            let _ = writeln!(
                svg,
                r##"  <circle class="frontier" cx="{cx:.2}" cy="{cy:.2}" r="7" fill="none" stroke="#c22" stroke-width="1.5"/>"##
            );
        }
        let _ = writeln!(
            svg,
            r#"  <text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            cx + 9.0,
            cy + 4.0,
            xml_escape(&p.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Write both report files.
pub fn emit_report(
    entries: &[(&str, &Summary)],
    points: &[ParetoPoint],
    frontier: &[usize],
    cost_label: &str,
    csv_path: &Path,
    svg_path: &Path,
) -> Result<()> {
    std::fs::write(csv_path, render_csv(entries)?)?;
    std::fs::write(svg_path, render_svg(points, frontier, cost_label))?;
    Ok(())
}
