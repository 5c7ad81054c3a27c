//! Mean micro-F1 curves with standard-error bands, rendered as SVG.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::runner::{MethodVariant, MetricRecord};

/// Per-iteration summary of one method across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub method: MethodVariant,
    /// (t, mean, standard error)
    pub points: Vec<(usize, f64, f64)>,
}

/// Groups records by method and iteration. The standard error uses the
/// sample standard deviation and is 0 when only one seed is present.
pub fn curves(records: &[MetricRecord]) -> Vec<Curve> {
    let mut by: BTreeMap<MethodVariant, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in records {
        by.entry(r.method).or_default().entry(r.t).or_default().push(r.micro_f1);
    }
    by.into_iter()
        .map(|(method, ts)| Curve {
            method,
            points: ts
                .into_iter()
                .map(|(t, v)| {
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let se = if v.len() > 1 {
                        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                        (var / n).sqrt()
                    } else {
                        0.0
                    };
                    (t, mean, se)
                })
                .collect(),
        })
        .collect()
}

fn plot_err<E: std::error::Error + Send + Sync>(e: DrawingAreaErrorKind<E>) -> Error {
    Error::InvalidArgument(format!("plot: {e}"))
}

/// Renders one line per method with a shaded band of one standard error.
/// `marks` are iterations to highlight with vertical rules, e.g. drift
/// times.
pub fn render_svg(records: &[MetricRecord], title: &str, marks: &[usize]) -> Result<String> {
    let curves = curves(records);
    if curves.is_empty() {
        return Err(Error::InvalidArgument("no metric records to plot".into()));
    }
    let t_max = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.0))
        .max()
        .unwrap_or(0)
        .max(1);
    let y_min = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.1 - p.2))
        .fold(1.0f64, f64::min)
        .clamp(0.0, 1.0);
    let y_lo = ((y_min * 20.0).floor() / 20.0).max(0.0);

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 540)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(48)
            .build_cartesian_2d(0f64..t_max as f64, y_lo..1.0f64)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("iteration")
            .y_desc("micro-F1")
            .light_line_style(WHITE.mix(0.0))
            .draw()
            .map_err(plot_err)?;

        for &m in marks {
            chart
                .draw_series(LineSeries::new(
                    [(m as f64, y_lo), (m as f64, 1.0)],
                    BLACK.mix(0.3).stroke_width(1),
                ))
                .map_err(plot_err)?;
        }

        for (i, c) in curves.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let band: Vec<(f64, f64)> = c
                .points
                .iter()
                .map(|&(t, m, se)| (t as f64, (m + se).min(1.0)))
                .chain(c.points.iter().rev().map(|&(t, m, se)| (t as f64, (m - se).max(y_lo))))
                .collect();
            chart
                .draw_series(std::iter::once(Polygon::new(band, color.mix(0.18).filled())))
                .map_err(plot_err)?;
            chart
                .draw_series(LineSeries::new(
                    c.points.iter().map(|&(t, m, _)| (t as f64, m)),
                    color.stroke_width(2),
                ))
                .map_err(plot_err)?
                .label(c.method.as_str())
                .legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color.stroke_width(2)));
        }
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::LowerRight)
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK.mix(0.3))
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

pub fn write_svg(records: &[MetricRecord], title: &str, marks: &[usize], out: &Path) -> Result<()> {
    std::fs::write(out, render_svg(records, title, marks)?)?;
    Ok(())
}
