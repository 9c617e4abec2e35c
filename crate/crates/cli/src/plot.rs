//! SVG figures: correctness bars with confidence intervals and trend curves.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Result};
use coax::experiment::{ExperimentReport, TrendResult};
use plotters::prelude::*;

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn err(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("plotting failed: {e}")
}

/// One bar per (dataset, condition) with a 95% CI whisker.
pub fn correctness_bars(report: &ExperimentReport, path: &Path) -> Result<()> {
    let cells = &report.cells;
    if cells.is_empty() {
        return Err(anyhow!("report has no cells to plot"));
    }
    let root = SVGBackend::new(path, (120 + 70 * cells.len() as u32, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(&report.title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(70)
        .y_label_area_size(50)
        .build_cartesian_2d(0f64..cells.len() as f64, 0f64..1f64)
        .map_err(err)?;
    let labels: Vec<String> = cells.iter().map(|c| format!("{} {}", c.dataset, c.cell)).collect();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .y_desc("mean correctness")
        .x_labels(cells.len() * 2)
        .x_label_formatter(&|x| {
            let i = x.floor() as usize;
            if (x - i as f64 - 0.5).abs() < 1e-9 {
                labels.get(i).cloned().unwrap_or_default()
            } else {
                String::new()
            }
        })
        .draw()
        .map_err(err)?;
    let datasets: Vec<&str> = {
        let mut d: Vec<&str> = cells.iter().map(|c| c.dataset.as_str()).collect();
        d.dedup();
        d
    };
    for (i, c) in cells.iter().enumerate() {
        let color = PALETTE[datasets.iter().position(|d| *d == c.dataset).unwrap_or(0) % PALETTE.len()];
        let x0 = i as f64 + 0.15;
        let x1 = i as f64 + 0.85;
        chart
            .draw_series(std::iter::once(Rectangle::new(
                [(x0, 0.0), (x1, c.mean)],
                color.mix(0.7).filled(),
            )))
            .map_err(err)?;
        let mid = i as f64 + 0.5;
        let (lo, hi) = ((c.mean - c.half_width).max(0.0), (c.mean + c.half_width).min(1.0));
        chart
            .draw_series([
                PathElement::new(vec![(mid, lo), (mid, hi)], BLACK.stroke_width(1)),
                PathElement::new(vec![(mid - 0.1, lo), (mid + 0.1, lo)], BLACK.stroke_width(1)),
                PathElement::new(vec![(mid - 0.1, hi), (mid + 0.1, hi)], BLACK.stroke_width(1)),
            ])
            .map_err(err)?;
    }
    root.present().map_err(err)?;
    Ok(())
}

/// Mean correctness against the swept variable, one line per condition.
pub fn condition_curves(report: &ExperimentReport, x_desc: &str, path: &Path) -> Result<()> {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for c in &report.cells {
        if let Some(x) = c.x {
            series.entry(c.cell.to_string()).or_default().push((x, c.mean));
        }
    }
    if series.is_empty() {
        return Err(anyhow!("report has no swept variable to plot"));
    }
    let named: Vec<(String, Vec<(f64, f64)>)> = series.into_iter().collect();
    lines(&report.title, x_desc, &named, path)
}

/// Bin means of a parameter sweep.
pub fn trend_curve(trend: &TrendResult, path: &Path) -> Result<()> {
    let title = format!(
        "correctness by {} (Spearman {:+.2})",
        trend.param.name(),
        trend.spearman
    );
    lines(
        &title,
        trend.param.name(),
        &[(trend.param.name().to_string(), trend.bin_means.clone())],
        path,
    )
}

fn lines(title: &str, x_desc: &str, series: &[(String, Vec<(f64, f64)>)], path: &Path) -> Result<()> {
    let xs = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0));
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
    let pad = ((hi - lo) * 0.05).max(0.5);
    let root = SVGBackend::new(path, (640, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d((lo - pad)..(hi + pad), 0f64..1f64)
        .map_err(err)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc("mean correctness")
        .draw()
        .map_err(err)?;
    for (i, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(err)?;
    root.present().map_err(err)?;
    Ok(())
}
