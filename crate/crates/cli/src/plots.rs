//! Plot data tables and their SVG renderings.

use std::path::Path;

use plotters::prelude::*;
use qar_mass::evaluate::HistogramBin;

use crate::error::{CliError, CliResult};
use crate::records::write_table;

/// One point of the predicted-versus-true scatter.
#[derive(Debug, Clone)]
pub struct ScatterPoint {
    pub partition: &'static str,
    pub flight_id: String,
    pub true_mass: f64,
    pub predicted_mass: f64,
}

const PARTITION_COLORS: [(&str, RGBColor); 3] = [
    ("train", RGBColor(160, 160, 160)),
    ("val", RGBColor(70, 130, 180)),
    ("test", RGBColor(200, 40, 40)),
];

fn plot_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::io(path, std::io::Error::other(e.to_string()))
}

pub fn write_scatter(csv_path: &Path, svg_path: &Path, title: &str, points: &[ScatterPoint]) -> CliResult<()> {
    let header = ["partition", "flight_id", "true_mass_kg", "predicted_mass_kg"].map(String::from);
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.partition.to_string(),
                p.flight_id.clone(),
                p.true_mass.to_string(),
                p.predicted_mass.to_string(),
            ]
        })
        .collect();
    write_table(csv_path, None, &header, &rows)?;

    let (lo, hi) = points
        .iter()
        .flat_map(|p| [p.true_mass, p.predicted_mass])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo / 1000.0, hi / 1000.0) } else { (0.0, 1.0) };
    let pad = ((hi - lo) * 0.05).max(1.0);
    let range = (lo - pad)..(hi + pad);

    let root = SVGBackend::new(svg_path, (720, 640)).into_drawing_area();
    let draw = || -> Result<(), Box<dyn std::error::Error + '_>> {
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(65)
            .build_cartesian_2d(range.clone(), range.clone())?;
        chart
            .configure_mesh()
            .x_desc("true initial mass (t)")
            .y_desc("predicted initial mass (t)")
            .draw()?;
        chart.draw_series(LineSeries::new([(range.start, range.start), (range.end, range.end)], BLACK.mix(0.5)))?;
        for (name, color) in PARTITION_COLORS {
            chart
                .draw_series(
                    points
                        .iter()
                        .filter(|p| p.partition == name)
                        .map(|p| Circle::new((p.true_mass / 1000.0, p.predicted_mass / 1000.0), 3, color.filled())),
                )?
                .label(name)
                .legend(move |(x, y)| Circle::new((x, y), 3, color.filled()));
        }
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::UpperLeft)
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| plot_error(svg_path, e))
}

pub fn write_histogram(csv_path: &Path, svg_path: &Path, title: &str, bins: &[HistogramBin]) -> CliResult<()> {
    let header = ["lower_pct", "upper_pct", "count"].map(String::from);
    let rows: Vec<Vec<String>> = bins
        .iter()
        .map(|b| vec![b.lower_pct.to_string(), b.upper_pct.to_string(), b.count.to_string()])
        .collect();
    write_table(csv_path, None, &header, &rows)?;

    let x0 = bins.first().map_or(-1.0, |b| b.lower_pct);
    let x1 = bins.last().map_or(1.0, |b| b.upper_pct);
    let top = bins.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64 * 1.1;

    let root = SVGBackend::new(svg_path, (720, 480)).into_drawing_area();
    let draw = || -> Result<(), Box<dyn std::error::Error + '_>> {
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(50)
            .build_cartesian_2d(x0..x1, 0.0..top)?;
        chart
            .configure_mesh()
            .x_desc("relative error (%)")
            .y_desc("flights")
            .draw()?;
        chart.draw_series(bins.iter().map(|b| {
            Rectangle::new([(b.lower_pct, 0.0), (b.upper_pct, b.count as f64)], RGBColor(70, 130, 180).filled())
        }))?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| plot_error(svg_path, e))
}
