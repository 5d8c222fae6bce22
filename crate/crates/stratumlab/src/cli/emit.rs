//! Report emission: canonical JSON, aligned plain-text tables, and one SVG
//! per sensitivity curve.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::cli::report::{MethodOutcome, Report};
use crate::cli::svg::render_sensitivity_curve;
use crate::error::Result;
use crate::sensitivity::PointOutcome;

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_else(|| "-".to_string())
}

/// Renders the aligned plain-text report.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let s = &report.data_summary;
    let _ = writeln!(out, "stratumlab report (schema {}, seed {})", report.schema, report.seed);
    let _ = writeln!(out);
    let _ = writeln!(out, "data");
    let _ = writeln!(out, "  records            {}", s.n);
    let _ = writeln!(out, "  control / treated  {} / {}", s.n_control, s.n_treated);
    let _ = writeln!(
        out,
        "  S rate control     {}   (missing {})",
        fmt_opt(s.s_rate_control),
        s.s_missing_control
    );
    let _ = writeln!(
        out,
        "  S rate treated     {}   (missing {})",
        fmt_opt(s.s_rate_treated),
        s.s_missing_treated
    );
    let _ = writeln!(out, "  outcome            {}", s.outcome_kind);
    let _ = writeln!(out, "  covariates         {}", s.covariates.join(", "));
    let _ = writeln!(
        out,
        "  estimand           stratum {} | contrast {}{}",
        report.config.estimand.stratum,
        report.config.estimand.contrast.label(),
        report
            .config
            .estimand
            .landmark
            .map(|l| format!(" | landmark {l}"))
            .unwrap_or_default()
    );
    if let Some(oracle) = &report.oracle {
        let _ = writeln!(
            out,
            "  oracle             {} (simulated in-process; unobservable in real data)",
            fmt_f(oracle.estimand_value)
        );
    }

    if !report.estimates.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<22} {:>12} {:>12} {:>12} {:>10}  note",
            "method", "estimate", "ci_lower", "ci_upper", "n_eff"
        );
        for (name, outcome) in &report.estimates {
            match outcome {
                MethodOutcome::Estimate(e) => {
                    let _ = writeln!(
                        out,
                        "{:<22} {:>12} {:>12} {:>12} {:>10.1}  {}",
                        name,
                        fmt_f(e.estimate),
                        fmt_opt(e.ci_lower),
                        fmt_opt(e.ci_upper),
                        e.n_effective,
                        e.diagnostics
                            .get("warning")
                            .and_then(|w| w.as_str())
                            .unwrap_or("")
                    );
                }
                MethodOutcome::Bounds(b) => {
                    let _ = writeln!(
                        out,
                        "{:<22} {:>12} {:>12} {:>12} {:>10}  bounds [{}, {}], outer CI [{}, {}]",
                        name,
                        "-",
                        "-",
                        "-",
                        "-",
                        fmt_f(b.lower),
                        fmt_f(b.upper),
                        fmt_opt(b.ci_lower_outer),
                        fmt_opt(b.ci_upper_outer),
                    );
                }
                MethodOutcome::Error { message } => {
                    let _ = writeln!(
                        out,
                        "{:<22} {:>12} {:>12} {:>12} {:>10}  FAILED: {message}",
                        name, "-", "-", "-", "-"
                    );
                }
            }
        }
    }

    if let Some(sensitivity) = &report.sensitivity {
        if let Some(curve) = &sensitivity.tipping {
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "tipping scan (null {}, tipping point {})",
                fmt_f(curve.null_value),
                fmt_opt(curve.tipping_point)
            );
            let _ = writeln!(
                out,
                "{:>10} {:>12} {:>12} {:>12}",
                "beta", "estimate", "ci_lower", "ci_upper"
            );
            for point in &curve.grid {
                match &point.outcome {
                    PointOutcome::Ok {
                        estimate,
                        ci_lower,
                        ci_upper,
                    } => {
                        let _ = writeln!(
                            out,
                            "{:>10} {:>12} {:>12} {:>12}",
                            format!("{:.3}", point.beta),
                            fmt_f(*estimate),
                            fmt_f(*ci_lower),
                            fmt_f(*ci_upper)
                        );
                    }
                    PointOutcome::Failed { message } => {
                        let _ = writeln!(
                            out,
                            "{:>10} {:>12} {:>12} {:>12}  FAILED: {message}",
                            format!("{:.3}", point.beta),
                            "-",
                            "-",
                            "-"
                        );
                    }
                }
            }
        }
        if let Some(error) = &sensitivity.tipping_error {
            let _ = writeln!(out, "tipping scan FAILED: {error}");
        }
        if let Some(points) = &sensitivity.monotonicity_relaxation {
            let _ = writeln!(out);
            let _ = writeln!(out, "monotonicity relaxation");
            let _ = writeln!(
                out,
                "{:>10} {:>9} {:>12} {:>12}",
                "defier", "feasible", "lower", "upper"
            );
            for p in points {
                match &p.bounds {
                    Some(b) => {
                        let _ = writeln!(
                            out,
                            "{:>10} {:>9} {:>12} {:>12}",
                            format!("{:.4}", p.defier_proportion),
                            p.feasible,
                            fmt_f(b.lower),
                            fmt_f(b.upper)
                        );
                    }
                    None => {
                        let _ = writeln!(
                            out,
                            "{:>10} {:>9} {:>12} {:>12}  {}",
                            format!("{:.4}", p.defier_proportion),
                            p.feasible,
                            "-",
                            "-",
                            p.error.as_deref().unwrap_or("")
                        );
                    }
                }
            }
        }
        if let Some(error) = &sensitivity.monotonicity_relaxation_error {
            let _ = writeln!(out, "monotonicity relaxation FAILED: {error}");
        }
        if let Some(entries) = &sensitivity.covariate_scan {
            let _ = writeln!(out);
            let _ = writeln!(out, "covariate-set scan");
            let _ = writeln!(
                out,
                "{:<28} {:>12} {:>12} {:>12}",
                "set", "estimate", "ci_lower", "ci_upper"
            );
            for entry in entries {
                match &entry.result {
                    Some(e) => {
                        let _ = writeln!(
                            out,
                            "{:<28} {:>12} {:>12} {:>12}",
                            entry.label,
                            fmt_f(e.estimate),
                            fmt_opt(e.ci_lower),
                            fmt_opt(e.ci_upper)
                        );
                    }
                    None => {
                        let _ = writeln!(
                            out,
                            "{:<28} {:>12} {:>12} {:>12}  FAILED: {}",
                            entry.label,
                            "-",
                            "-",
                            "-",
                            entry.error.as_deref().unwrap_or("")
                        );
                    }
                }
            }
        }
        if let Some(error) = &sensitivity.covariate_scan_error {
            let _ = writeln!(out, "covariate-set scan FAILED: {error}");
        }
    }

    let failures = report.method_failures();
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "summary: {} of {} methods failed",
        failures,
        report.estimates.len()
    );
    out
}

/// Writes `<stem>.json`, `<stem>.txt`, and `<stem>_tipping.svg` when the
/// report carries a tipping curve. Returns the files written.
pub fn emit(report: &Report, stem: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();

    let json_path = stem.with_extension("json");
    std::fs::write(&json_path, report.to_canonical_json()?)?;
    written.push(json_path);

    let txt_path = stem.with_extension("txt");
    std::fs::write(&txt_path, render_text(report))?;
    written.push(txt_path);

    if let Some(curve) = report.sensitivity.as_ref().and_then(|s| s.tipping.as_ref()) {
        let svg_path = with_suffix(stem, "_tipping.svg");
        let title = format!(
            "tipping scan: stratum {} ({})",
            report.config.estimand.stratum,
            report.config.estimand.contrast.label()
        );
        std::fs::write(&svg_path, render_sensitivity_curve(curve, &title))?;
        written.push(svg_path);
    }
    Ok(written)
}

pub(crate) fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut name = stem
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(suffix);
    stem.with_file_name(name)
}
