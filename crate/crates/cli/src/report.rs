//! Trace post-processing: fitted convergence slopes, summary text, and the
//! SVG plots (running-minimum gradient norm, Lipschitz estimate, angle).

use std::path::Path;

use anyhow::{bail, Context, Result};

use vmckit::diagnostics::{loglog_slope, running_min, inequality_ledger, LedgerEntry};
use vmckit::trace::{Column, Trace};

use crate::svg::{LinePlot, Series};

pub struct LoadedTrace {
    pub name: String,
    pub trace: Trace,
}

pub fn load_trace(path: &Path) -> Result<LoadedTrace> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trace")
        .to_string();
    let trace = Trace::read_file(path)
        .with_context(|| format!("failed to read trace {}", path.display()))?;
    if trace.rows.is_empty() {
        bail!("trace {} contains no rows", path.display());
    }
    Ok(LoadedTrace { name, trace })
}

fn slope_annotation(values: &[f64], burn_in: usize) -> String {
    let rm = running_min(values);
    match loglog_slope(&rm, burn_in.min(values.len() / 4)) {
        Ok(fit) => format!(
            "fitted slope {:.3} (log-log, from step {})",
            fit.slope, fit.burn_in_step
        ),
        Err(e) => format!("slope fit unavailable: {e}"),
    }
}

fn series_of(trace: &Trace, column: Column, name: &str) -> Option<Series> {
    let points: Vec<(f64, f64)> = trace
        .rows
        .iter()
        .filter_map(|r| r.get(column).map(|v| (r.step.max(1) as f64, v)))
        .collect();
    if points.is_empty() {
        None
    } else {
        Some(Series {
            name: name.to_string(),
            points,
        })
    }
}

/// The accumulated inequality check for traces that carry exact per-step
/// gradients: Σ η|∇L|² against the fitted right-hand side. Losses are
/// shifted to be nonnegative (only differences matter to the underlying
/// telescoping); the batch size is read back from the sampling header.
fn ledger_line(t: &Trace) -> Option<String> {
    let grads: Vec<f64> = t.rows.iter().map(|r| r.grad_norm_exact).collect::<Option<_>>()?;
    let losses: Vec<f64> = t
        .rows
        .iter()
        .map(|r| r.energy_exact.or(r.objective))
        .collect::<Option<_>>()?;
    let n = t
        .sampling
        .split_whitespace()
        .find_map(|field| field.strip_prefix("n=").and_then(|v| v.parse::<usize>().ok()))
        .unwrap_or(1);
    let floor = losses.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let mut cr = 1.0f64;
    for r in &t.rows {
        if let Some(ratio) = r.norm_ratio {
            cr = cr.max(ratio).max(1.0 / ratio);
        }
    }
    let entries: Vec<LedgerEntry> = t
        .rows
        .iter()
        .zip(&grads)
        .zip(&losses)
        .map(|((r, &g), &l)| LedgerEntry {
            eta: r.eta,
            grad_norm_exact: g,
            loss: l - floor,
        })
        .collect();
    let report = inequality_ledger(&entries, n, cr).ok()?;
    let shift = if floor < 0.0 { -floor } else { 0.0 };
    Some(format!(
        "  inequality ledger: LHS {:.4e} vs RHS {:.4e} (ratio {:.3}, C fit {:.3e}, C_r {:.3}, loss shift {:.3e}) — {}\n",
        report.lhs,
        report.rhs,
        report.ratio,
        report.fitted_c,
        report.cr,
        shift,
        if report.holds { "holds" } else { "VIOLATED" }
    ))
}

/// Emits the plots and the text summary for a set of traces into `out`.
/// Returns the text report.
pub fn build_report(traces: &[LoadedTrace], out: &Path, burn_in: usize) -> Result<String> {
    std::fs::create_dir_all(out)?;
    let mut text = String::new();
    text.push_str("trace report\n============\n");

    let mut runmin_series = Vec::new();
    let mut angle_series = Vec::new();
    let mut lipschitz_series = Vec::new();

    for loaded in traces {
        let t = &loaded.trace;
        text.push_str(&format!(
            "\n{}\n  sampling: {}\n  run: {}\n  rows: {}\n",
            loaded.name, t.sampling, t.run, t.rows.len()
        ));
        let grad = t.series(Column::GradNorm)?;
        text.push_str(&format!(
            "  gradient norm: first {:.4e}, last {:.4e}; {}\n",
            grad.first().copied().unwrap_or(f64::NAN),
            grad.last().copied().unwrap_or(f64::NAN),
            slope_annotation(&grad, burn_in)
        ));
        if let Some(series) = series_of(t, Column::EnergyEst, &loaded.name) {
            let last = series.points.last().expect("nonempty").1;
            text.push_str(&format!("  final energy estimate: {last:.6}\n"));
        }
        if let Some(series) = series_of(t, Column::EnergyExact, &loaded.name) {
            let last = series.points.last().expect("nonempty").1;
            text.push_str(&format!("  final exact energy: {last:.10}\n"));
        }
        if let Some(series) = series_of(t, Column::SiLoss, &loaded.name) {
            let last = series.points.last().expect("nonempty").1;
            text.push_str(&format!("  final scale-invariant loss: {last:.4e}\n"));
        }
        if let Some(series) = series_of(t, Column::Angle, &loaded.name) {
            let last = series.points.last().expect("nonempty").1;
            text.push_str(&format!("  final sin angle: {last:.4}\n"));
            angle_series.push(Series {
                name: loaded.name.clone(),
                points: series.points,
            });
        }
        if let Some(series) = series_of(t, Column::LipschitzEst, &loaded.name) {
            lipschitz_series.push(series);
        }
        if let Ok(exact) = t.series(Column::GradNormExact) {
            text.push_str(&format!(
                "  exact gradient norm: first {:.4e}, last {:.4e}; {}\n",
                exact.first().copied().unwrap_or(f64::NAN),
                exact.last().copied().unwrap_or(f64::NAN),
                slope_annotation(&exact, burn_in)
            ));
        }
        if let Some(line) = ledger_line(t) {
            text.push_str(&line);
        }
        let rm = running_min(&grad);
        runmin_series.push(Series {
            name: loaded.name.clone(),
            points: rm
                .iter()
                .enumerate()
                .map(|(m, &v)| ((m.max(1)) as f64, v))
                .collect(),
        });
    }

    let annotation = traces
        .iter()
        .map(|l| {
            let grad = l.trace.series(Column::GradNorm).unwrap_or_default();
            format!("{}: {}", l.name, slope_annotation(&grad, burn_in))
        })
        .collect::<Vec<_>>()
        .join("; ");
    let runmin_plot = LinePlot {
        title: "running minimum of the gradient-estimate norm".into(),
        x_label: "step".into(),
        y_label: "running min |G|".into(),
        log_x: true,
        log_y: true,
        series: runmin_series,
        annotation,
    };
    std::fs::write(out.join("runmin_grad.svg"), runmin_plot.render())?;
    text.push_str("\nwrote runmin_grad.svg\n");

    if !lipschitz_series.is_empty() {
        let plot = LinePlot {
            title: "per-step Lipschitz estimate".into(),
            x_label: "step".into(),
            y_label: "|dG|/|dtheta|".into(),
            log_x: true,
            log_y: true,
            series: lipschitz_series,
            annotation: String::new(),
        };
        std::fs::write(out.join("lipschitz.svg"), plot.render())?;
        text.push_str("wrote lipschitz.svg\n");
    }
    if !angle_series.is_empty() {
        let plot = LinePlot {
            title: "angle between trained and target states".into(),
            x_label: "step".into(),
            y_label: "sin angle".into(),
            log_x: true,
            log_y: true,
            series: angle_series,
            annotation: String::new(),
        };
        std::fs::write(out.join("angle.svg"), plot.render())?;
        text.push_str("wrote angle.svg\n");
    }

    std::fs::write(out.join("report.txt"), &text)?;
    Ok(text)
}
