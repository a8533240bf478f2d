//! Grouped bar charts of the phoneme-group tables.

use std::path::{Path, PathBuf};

use eegspeech_core::corpus::SplitName;
use eegspeech_core::eval::{EvalReport, GroupRow};
use eegspeech_core::Error;
use plotters::prelude::*;

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

type Metric = (&'static str, &'static str, fn(&GroupRow) -> Option<f64>);

const METRICS: [Metric; 3] = [
    ("mcd", "MCD (dB)", |r| r.mcd),
    ("mel_corr", "Mel-Corr (%)", |r| r.mel_corr),
    ("top3", "Top-3 accuracy (%)", |r| r.top3),
];

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Unsupported(format!("plotting failed: {e}"))
}

/// `axis:group` labels and, per report, the value of each label.
fn series(reports: &[EvalReport], split: SplitName, metric: fn(&GroupRow) -> Option<f64>) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let mut labels: Vec<String> = Vec::new();
    for r in reports {
        for t in r.groups.iter().filter(|t| t.split == split) {
            for row in &t.rows {
                let l = format!("{:?}:{}", t.axis, row.group).to_lowercase();
                if !labels.contains(&l) {
                    labels.push(l);
                }
            }
        }
    }
    let values = reports
        .iter()
        .map(|r| {
            labels
                .iter()
                .map(|l| {
                    r.groups
                        .iter()
                        .filter(|t| t.split == split)
                        .flat_map(|t| t.rows.iter().map(move |row| (format!("{:?}:{}", t.axis, row.group).to_lowercase(), row)))
                        .find(|(k, _)| k == l)
                        .and_then(|(_, row)| metric(row))
                })
                .collect()
        })
        .collect();
    (labels, values)
}

/// One SVG per metric: bars per group, one series per report.
pub fn group_charts(reports: &[EvalReport], split: SplitName, out: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut files = Vec::new();
    for (key, title, metric) in METRICS {
        let (labels, values) = series(reports, split, metric);
        if labels.is_empty() {
            return Err(Error::Data(format!("no group tables for split {}", split.as_str())));
        }
        let path = out.join(format!("{}_{key}.svg", split.as_str()));
        let n = labels.len();
        let k = reports.len().max(1);
        let top = values
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |a, &v| a.max(v.abs()))
            .max(1.0)
            * 1.1;
        let bottom = values.iter().flatten().flatten().fold(0.0f64, |a, &v| a.min(v)) * 1.1;
        {
            let root = SVGBackend::new(&path, (160 + 36 * n as u32 * k as u32, 520)).into_drawing_area();
            root.fill(&WHITE).map_err(plot_err)?;
            let mut chart = ChartBuilder::on(&root)
                .caption(format!("{title}, {}", split.as_str()), ("sans-serif", 20))
                .margin(12)
                .x_label_area_size(140)
                .y_label_area_size(60)
                .build_cartesian_2d(0f64..n as f64, bottom..top)
                .map_err(plot_err)?;
            chart
                .configure_mesh()
                .disable_x_mesh()
                .x_labels(n + 1)
                .x_label_formatter(&|x| {
                    let i = x.floor() as usize;
                    if (x - x.floor() - 0.5).abs() < 1e-9 && i < n {
                        labels[i].clone()
                    } else {
                        String::new()
                    }
                })
                .x_label_style(("sans-serif", 11).into_font().transform(FontTransform::Rotate90))
                .y_desc(title)
                .draw()
                .map_err(plot_err)?;
            let width = 0.8 / k as f64;
            for (si, (report, vals)) in reports.iter().zip(&values).enumerate() {
                let color = PALETTE[si % PALETTE.len()];
                let name = if report.metadata.phoneme_predictor {
                    report.metadata.variant.clone()
                } else {
                    format!("{} (no predictor)", report.metadata.variant)
                };
                chart
                    .draw_series(vals.iter().enumerate().filter_map(|(i, v)| {
                        let v = (*v)?;
                        let x0 = i as f64 + 0.1 + si as f64 * width;
                        Some(Rectangle::new([(x0, 0.0), (x0 + width, v)], color.filled()))
                    }))
                    .map_err(plot_err)?
                    .label(name)
                    .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(plot_err)?;
            root.present().map_err(plot_err)?;
        }
        files.push(path);
    }
    Ok(files)
}
