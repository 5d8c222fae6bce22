//! Minimal SVG 1.1 line plot for sensitivity curves: estimate polyline, CI
//! band, null line, and tipping-point marker.

use crate::sensitivity::{PointOutcome, SensitivityCurve};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

struct Scale {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Scale {
    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn fmt(v: f64) -> String {
    format!("{:.4}", v)
}

/// Renders one sensitivity curve. Contiguous runs of successful grid points
/// become polyline segments (the estimate polyline carries id="estimate") on
/// top of their CI band; the null value is a dashed line and the tipping
/// point, when present, a marked circle.
pub fn render_sensitivity_curve(curve: &SensitivityCurve, title: &str) -> String {
    let ok_points: Vec<(f64, f64, f64, f64)> = curve
        .grid
        .iter()
        .filter_map(|p| match &p.outcome {
            PointOutcome::Ok {
                estimate,
                ci_lower,
                ci_upper,
            } => Some((p.beta, *estimate, *ci_lower, *ci_upper)),
            PointOutcome::Failed { .. } => None,
        })
        .collect();

    let (x_min, x_max) = curve
        .grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.beta), hi.max(p.beta))
        });
    let mut y_min = curve.null_value;
    let mut y_max = curve.null_value;
    for (_, est, lo, hi) in &ok_points {
        y_min = y_min.min(*lo).min(*est);
        y_max = y_max.max(*hi).max(*est);
    }
    if !y_min.is_finite() || !y_max.is_finite() {
        y_min = -1.0;
        y_max = 1.0;
    }
    let pad = ((y_max - y_min) * 0.08).max(1e-9);
    let scale = Scale {
        x_min,
        x_max: if x_max > x_min { x_max } else { x_min + 1.0 },
        y_min: y_min - pad,
        y_max: y_max + pad,
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" \
         height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" \
         text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    ));

    // Axes.
    let x0 = scale.x(scale.x_min);
    let x1 = scale.x(scale.x_max);
    let y0 = scale.y(scale.y_min);
    let y1 = scale.y(scale.y_max);
    svg.push_str(&format!(
        "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    for i in 0..=4 {
        let beta = scale.x_min + (scale.x_max - scale.x_min) * f64::from(i) / 4.0;
        let px = scale.x(beta);
        svg.push_str(&format!(
            "  <line x1=\"{px}\" y1=\"{y0}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            y0 + 4.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            y0 + 18.0,
            fmt(beta)
        ));
        let value = scale.y_min + (scale.y_max - scale.y_min) * f64::from(i) / 4.0;
        let py = scale.y(value);
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            x0 - 6.0,
            py + 4.0,
            fmt(value)
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">selection parameter beta</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    ));

    // CI band and estimate polyline per contiguous successful run.
    let mut runs: Vec<Vec<(f64, f64, f64, f64)>> = Vec::new();
    let mut current: Vec<(f64, f64, f64, f64)> = Vec::new();
    for p in &curve.grid {
        match &p.outcome {
            PointOutcome::Ok {
                estimate,
                ci_lower,
                ci_upper,
            } => current.push((p.beta, *estimate, *ci_lower, *ci_upper)),
            PointOutcome::Failed { .. } => {
                if !current.is_empty() {
                    runs.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }

    for run in &runs {
        if run.len() >= 2 {
            let mut band = String::new();
            for (beta, _, lo, _) in run {
                band.push_str(&format!("{},{} ", scale.x(*beta), scale.y(*lo)));
            }
            for (beta, _, _, hi) in run.iter().rev() {
                band.push_str(&format!("{},{} ", scale.x(*beta), scale.y(*hi)));
            }
            svg.push_str(&format!(
                "  <polygon points=\"{}\" fill=\"#9ecae1\" fill-opacity=\"0.45\" stroke=\"none\"/>\n",
                band.trim_end()
            ));
        }
    }

    // Null line.
    let null_y = scale.y(curve.null_value);
    svg.push_str(&format!(
        "  <line x1=\"{x0}\" y1=\"{null_y}\" x2=\"{x1}\" y2=\"{null_y}\" stroke=\"#777777\" \
         stroke-dasharray=\"6 4\"/>\n"
    ));

    for (i, run) in runs.iter().enumerate() {
        let points: String = run
            .iter()
            .map(|(beta, est, _, _)| format!("{},{}", scale.x(*beta), scale.y(*est)))
            .collect::<Vec<_>>()
            .join(" ");
        let id_attr = if i == 0 { " id=\"estimate\"" } else { "" };
        svg.push_str(&format!(
            "  <polyline{id_attr} points=\"{points}\" fill=\"none\" stroke=\"#08519c\" \
             stroke-width=\"2\"/>\n"
        ));
    }

    if let Some(tipping) = curve.tipping_point {
        let px = scale.x(tipping);
        svg.push_str(&format!(
            "  <circle id=\"tipping\" cx=\"{px}\" cy=\"{null_y}\" r=\"5\" fill=\"#de2d26\"/>\n"
        ));
        svg.push_str(&format!(
            "  <text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">tipping {}</text>\n",
            null_y - 10.0,
            fmt(tipping)
        ));
    }

    svg.push_str("</svg>\n");
    svg
}
