use std::path::Path;

use hfttc_core::safety::{SafetyThresholds, TtcDistribution};
use hfttc_core::{Error, Result};
use plotters::prelude::*;

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        message: format!("plot: {e}"),
    }
}

/// Step-shaped CDF polyline on the analysis grid.
fn cdf_steps(dist: &TtcDistribution, thr: &SafetyThresholds) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    let mut prev = 0.0;
    for (t, f) in dist.cdf_grid(thr.dt, thr.steps()) {
        pts.push((t, prev));
        pts.push((t, f));
        prev = f;
    }
    pts
}

/// PMF (left) and CDF (right) of one HF-TTC distribution. With
/// `traditional`, the constant-velocity TTC is overlaid as a unit step.
pub fn risk_svg(
    path: &Path,
    title: &str,
    dist: &TtcDistribution,
    traditional: Option<Option<f64>>,
    thr: &SafetyThresholds,
) -> Result<()> {
    let root = SVGBackend::new(path, (900, 360)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let root = root.titled(title, ("sans-serif", 18)).map_err(|e| plot_err(path, e))?;
    let (left, right) = root.split_horizontally(450);

    let mut pmf = ChartBuilder::on(&left)
        .caption("HF-TTC PMF", ("sans-serif", 14))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(0.0..thr.horizon, 0.0..1.05)
        .map_err(|e| plot_err(path, e))?;
    pmf.configure_mesh()
        .x_desc("t (s)")
        .y_desc("P")
        .draw()
        .map_err(|e| plot_err(path, e))?;
    let half = thr.dt * 0.4;
    pmf.draw_series(
        dist.atoms
            .iter()
            .map(|&(t, p)| Rectangle::new([(t - half, 0.0), (t + half, p)], BLUE.filled())),
    )
    .map_err(|e| plot_err(path, e))?;

    let mut cdf = ChartBuilder::on(&right)
        .caption("HF-TTC CDF", ("sans-serif", 14))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(0.0..thr.horizon, 0.0..1.05)
        .map_err(|e| plot_err(path, e))?;
    cdf.configure_mesh()
        .x_desc("t (s)")
        .y_desc("F(t)")
        .draw()
        .map_err(|e| plot_err(path, e))?;
    cdf.draw_series(LineSeries::new(cdf_steps(dist, thr), BLUE.stroke_width(2)))
        .map_err(|e| plot_err(path, e))?
        .label("HF-TTC")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], BLUE));
    if let Some(trad) = traditional {
        let step = match trad {
            Some(t) => vec![(0.0, 0.0), (t, 0.0), (t, 1.0), (thr.horizon, 1.0)],
            None => vec![(0.0, 0.0), (thr.horizon, 0.0)],
        };
        cdf.draw_series(LineSeries::new(step, RED.stroke_width(2)))
            .map_err(|e| plot_err(path, e))?
            .label("traditional TTC")
            .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], RED));
    }
    cdf.configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperLeft)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))?;
    Ok(())
}
