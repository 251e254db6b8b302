//! Static SVG line charts of sweep results.

use std::path::Path;

use plotters::prelude::*;

use super::SweepResult;
use crate::error::{Error, Result};

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

fn padded(lo: f64, hi: f64, pad: f64) -> (f64, f64) {
    if hi > lo {
        let p = (hi - lo) * 0.05;
        (lo - p, hi + p)
    } else {
        (lo - pad, hi + pad)
    }
}

/// Median NMSE in dB against the axis value, one line with markers per method.
pub fn render_svg(result: &SweepResult, path: &Path) -> Result<()> {
    let mut methods = Vec::new();
    for p in &result.points {
        if !methods.contains(&p.method) {
            methods.push(p.method);
        }
    }
    let xs: Vec<f64> = result.points.iter().map(|p| p.axis_value).collect();
    let ys: Vec<f64> = result.points.iter().map(|p| p.nmse_db_median).filter(|y| y.is_finite()).collect();
    let (x0, x1) = if xs.is_empty() {
        (0.0, 1.0)
    } else {
        padded(xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0)
    };
    let (y0, y1) = if ys.is_empty() {
        (-40.0, 0.0)
    } else {
        padded(ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max), 5.0)
    };

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("NMSE vs {}", result.axis), ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc(result.axis.name())
        .y_desc("median NMSE (dB)")
        .draw()
        .map_err(|e| plot_err(path, e))?;

    for (i, &method) in methods.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let mut pts: Vec<(f64, f64)> = result
            .series(method)
            .iter()
            .filter(|p| p.nmse_db_median.is_finite())
            .map(|p| (p.axis_value, p.nmse_db_median))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(|e| plot_err(path, e))?
            .label(method.name())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 4, color.filled())))
            .map_err(|e| plot_err(path, e))?;
    }
    if !methods.is_empty() {
        chart
            .configure_series_labels()
            .border_style(BLACK)
            .background_style(WHITE.mix(0.9))
            .draw()
            .map_err(|e| plot_err(path, e))?;
    }
    root.present().map_err(|e| plot_err(path, e))
}
