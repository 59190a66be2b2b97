use crate::log::{parse_vec, TrajectoryLog};
use crate::CliError;
use plotters::prelude::*;
use plotters::series::DashedLineSeries;
use std::path::Path;

/// Points drawn per curve at most.
const MAX_POINTS: usize = 4000;

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Plot(e.to_string())
}

fn stride(rows: usize) -> usize {
    rows.div_ceil(MAX_POINTS).max(1)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

/// Agent dimensions recorded in the log metadata.
fn dims(log: &TrajectoryLog) -> Option<Vec<usize>> {
    let raw = log.meta("dims")?;
    let inner = raw.trim().strip_prefix('[')?.strip_suffix(']')?;
    inner.split(',').map(|p| p.trim().parse().ok()).collect()
}

/// Writes `phase.svg` (two-dimensional agents only) and `time.svg` into `dir`.
/// Returns notices for plots that were skipped.
pub fn plot_log(log: &TrajectoryLog, dir: &Path) -> Result<Vec<String>, CliError> {
    let mut notices = Vec::new();
    let all_planar = dims(log).is_some_and(|d| !d.is_empty() && d.iter().all(|&n| n == 2));
    if all_planar {
        phase_plane(log, &dir.join("phase.svg"))?;
    } else {
        notices.push("phase plane skipped: every agent must be two-dimensional".to_string());
    }
    time_response(log, &dir.join("time.svg"))?;
    Ok(notices)
}

pub fn phase_plane(log: &TrajectoryLog, path: &Path) -> Result<(), CliError> {
    let m = log.dim();
    let xcol = log.column("x0").ok_or_else(|| plot_err("log has no x0 column"))?;
    let x_star = log.x_star().unwrap_or_default();
    let sources = log.meta("sources").and_then(parse_vec).unwrap_or_default();
    let step = stride(log.rows.len());
    let pts = |axis: usize| {
        log.rows
            .iter()
            .flat_map(move |r| (axis..m).step_by(2).map(move |c| r[xcol + c]))
            .chain(x_star.iter().skip(axis).step_by(2).copied())
            .chain(sources.iter().skip(axis).step_by(2).copied())
    };
    let (x_lo, x_hi) = bounds(pts(0));
    let (y_lo, y_hi) = bounds(pts(1));

    let root = SVGBackend::new(path, (800, 700)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Agent positions", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(48)
        .build_cartesian_2d(x_lo..x_hi, y_lo..y_hi)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("first coordinate").y_desc("second coordinate").draw().map_err(plot_err)?;
    for agent in 0..m / 2 {
        let color = Palette99::pick(agent).to_rgba();
        let line = log
            .rows
            .iter()
            .step_by(step)
            .map(|r| (r[xcol + 2 * agent], r[xcol + 2 * agent + 1]));
        chart
            .draw_series(LineSeries::new(line, color.stroke_width(1)))
            .map_err(plot_err)?
            .label(format!("agent {}", agent + 1))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        if let Some(s) = sources.get(2 * agent..2 * agent + 2) {
            chart
                .draw_series(std::iter::once(Circle::new((s[0], s[1]), 6, color.stroke_width(2))))
                .map_err(plot_err)?;
        }
        if let Some(s) = x_star.get(2 * agent..2 * agent + 2) {
            chart
                .draw_series(std::iter::once(Cross::new((s[0], s[1]), 6, BLACK.stroke_width(2))))
                .map_err(plot_err)?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

pub fn time_response(log: &TrajectoryLog, path: &Path) -> Result<(), CliError> {
    let m = log.dim();
    let xcol = log.column("x0").ok_or_else(|| plot_err("log has no x0 column"))?;
    let tcol = log.column("t").ok_or_else(|| plot_err("log has no t column"))?;
    let x_star = log.x_star().unwrap_or_default();
    let step = stride(log.rows.len());
    let (t_lo, t_hi) = bounds(log.rows.iter().map(|r| r[tcol]));
    let (y_lo, y_hi) = bounds(
        log.rows
            .iter()
            .flat_map(|r| r[xcol..xcol + m].iter().copied())
            .chain(x_star.iter().copied()),
    );

    let root = SVGBackend::new(path, (1000, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Time response", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(48)
        .build_cartesian_2d(t_lo..t_hi, y_lo..y_hi)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("t").y_desc("x").draw().map_err(plot_err)?;
    for c in 0..m {
        let color = Palette99::pick(c).to_rgba();
        let line = log.rows.iter().step_by(step).map(|r| (r[tcol], r[xcol + c]));
        chart
            .draw_series(LineSeries::new(line, color.stroke_width(1)))
            .map_err(plot_err)?
            .label(format!("x{c}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        if let Some(&v) = x_star.get(c) {
            chart
                .draw_series(DashedLineSeries::new(vec![(t_lo, v), (t_hi, v)], 6, 4, color.into()))
                .map_err(plot_err)?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}
