//! Log-log plots of gap against budget.

use std::path::Path;

use anyhow::{anyhow, bail, Result};
use plotters::prelude::*;

/// Draws measured gaps and the theoretical bound on log-log axes (SVG).
pub fn emit_plot(path: &Path, title: &str, gaps: &[(f64, f64)], bounds: &[(f64, f64)]) -> Result<()> {
    let pos = |pts: &[(f64, f64)]| -> Vec<(f64, f64)> {
        pts.iter().copied().filter(|(n, g)| *n > 0.0 && *g > 0.0 && g.is_finite()).collect()
    };
    let gaps = pos(gaps);
    let bounds = pos(bounds);
    if gaps.is_empty() {
        bail!("nothing to plot: the sweep has no positive gaps");
    }
    let all: Vec<&(f64, f64)> = gaps.iter().chain(&bounds).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for (n, g) in &all {
        x0 = x0.min(*n);
        x1 = x1.max(*n);
        y0 = y0.min(*g);
        y1 = y1.max(*g);
    }
    let (x0, x1) = (x0 / 1.5, x1 * 1.5);
    let (y0, y1) = (y0 / 2.0, y1 * 2.0);

    let root = SVGBackend::new(path, (800, 600)).into_drawing_area();
    let err = |e: &dyn std::fmt::Display| anyhow!("plot {}: {e}", path.display());
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 24))
        .margin(20)
        .x_label_area_size(50)
        .y_label_area_size(80)
        .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc("oracle calls N")
        .y_desc("f(x) - f*")
        .x_label_formatter(&|v| format!("{v:.0e}"))
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(|e| err(&e))?;
    chart
        .draw_series(LineSeries::new(gaps.iter().copied(), BLUE.stroke_width(2)))
        .map_err(|e| err(&e))?
        .label("measured")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
    chart
        .draw_series(gaps.iter().map(|p| Circle::new(*p, 4, BLUE.filled())))
        .map_err(|e| err(&e))?;
    if !bounds.is_empty() {
        chart
            .draw_series(LineSeries::new(bounds.iter().copied(), RED.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label("bound")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}
