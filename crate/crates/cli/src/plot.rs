//! SVG figures from trace files.

use std::collections::HashMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use plotters::coord::Shift;
use plotters::prelude::*;

use crate::error::CliError;
use crate::output::write_atomic;

#[derive(Debug, clap::Args)]
pub struct PlotArgs {
    /// Trace CSV; figure 5 takes two (uncoupled first, then coupled).
    #[arg(long = "trace", required = true)]
    pub traces: Vec<PathBuf>,
    #[arg(long, value_parser = ["2", "3", "5"])]
    pub figure: String,
    /// Output SVG path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Numeric CSV columns keyed by header.
pub struct Table {
    path: PathBuf,
    columns: HashMap<String, Vec<f64>>,
    headers: Vec<String>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let bad = |reason: String| CliError::BadTrace {
            path: path.to_path_buf(),
            reason,
        };
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            for (k, field) in rec.iter().enumerate() {
                // non-numeric columns (hashes) are kept as NaN
                cols[k].push(field.parse().unwrap_or(f64::NAN));
            }
            if rec.len() != headers.len() {
                return Err(bad(format!(
                    "row {} has {} fields, header has {}",
                    line + 2,
                    rec.len(),
                    headers.len()
                )));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns: headers.iter().cloned().zip(cols).collect(),
            headers,
        })
    }

    pub fn column(&self, name: &str) -> Result<&[f64], CliError> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| CliError::MissingColumn {
                path: self.path.clone(),
                column: name.to_string(),
            })
    }

    /// `row_1..row_L` in order.
    fn rows(&self) -> Result<Vec<&[f64]>, CliError> {
        self.column("row_1")?;
        let n = self
            .headers
            .iter()
            .filter(|h| h.starts_with("row_"))
            .count();
        (1..=n).map(|u| self.column(&format!("row_{u}"))).collect()
    }

    fn label(&self) -> String {
        self.path.display().to_string()
    }
}

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(format!("plot: {e}"))
}

fn span(values: impl Iterator<Item = f64>) -> Range<f64> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let lo = lo.min(0.0);
    let pad = ((hi - lo) * 0.05).max(1e-9);
    lo..hi + pad
}

fn line_panel(
    area: &DrawingArea<SVGBackend, Shift>,
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    colour: RGBColor,
) -> Result<(), CliError> {
    let x_range = span(xs.iter().copied());
    let y_range = span(ys.iter().copied());
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(x_range, y_range)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .disable_mesh()
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(
            xs.iter().copied().zip(ys.iter().copied()),
            &colour,
        ))
        .map_err(plot_err)?;
    Ok(())
}

fn row_panel(
    area: &DrawingArea<SVGBackend, Shift>,
    table: &Table,
    title: &str,
) -> Result<(), CliError> {
    let rows = table.rows()?;
    let means: Vec<f64> = rows
        .iter()
        .map(|r| {
            if r.is_empty() {
                0.0
            } else {
                r.iter().sum::<f64>() / r.len() as f64
            }
        })
        .collect();
    let xs: Vec<f64> = (1..=means.len()).map(|u| u as f64).collect();
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(0.5..means.len() as f64 + 0.5, span(means.iter().copied()))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("row")
        .y_desc("mean firing neurons")
        .disable_mesh()
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(
            xs.iter().copied().zip(means.iter().copied()),
            &BLUE,
        ))
        .map_err(plot_err)?;
    chart
        .draw_series(
            xs.iter()
                .zip(&means)
                .map(|(&x, &y)| Circle::new((x, y), 3, BLUE.filled())),
        )
        .map_err(plot_err)?;
    Ok(())
}

/// Renders `figure` from `tables` into an SVG string.
pub fn render(figure: &str, tables: &[Table]) -> Result<String, CliError> {
    let first = tables
        .first()
        .ok_or_else(|| CliError::Usage("no trace given".into()))?;
    let mut svg = String::new();
    match figure {
        "2" => {
            let cmp = first.column("cmp")?;
            let t = first.column("t")?;
            let root = SVGBackend::with_string(&mut svg, (900, 420)).into_drawing_area();
            root.fill(&WHITE).map_err(plot_err)?;
            line_panel(&root, "Compatibility", "t (ms)", "Cmp", t, cmp, RED)?;
            root.present().map_err(plot_err)?;
        }
        "3" => {
            let cmp = first.column("cmp")?;
            let fire = first.column("firing_branch_mean")?;
            let t = first.column("t")?;
            let root = SVGBackend::with_string(&mut svg, (900, 760)).into_drawing_area();
            root.fill(&WHITE).map_err(plot_err)?;
            let (top, bottom) = root.split_vertically(380);
            line_panel(
                &top,
                "Average firing number per branch",
                "t (ms)",
                "firing / branch",
                t,
                fire,
                BLUE,
            )?;
            line_panel(&bottom, "Compatibility", "t (ms)", "Cmp", t, cmp, RED)?;
            root.present().map_err(plot_err)?;
        }
        "5" => {
            if tables.len() > 2 {
                return Err(CliError::Usage("figure 5 takes at most two traces".into()));
            }
            for table in tables {
                table.rows()?;
            }
            let root = SVGBackend::with_string(&mut svg, (900, 380 * tables.len() as u32))
                .into_drawing_area();
            root.fill(&WHITE).map_err(plot_err)?;
            let panels = root.split_evenly((tables.len(), 1));
            for (area, table) in panels.iter().zip(tables) {
                row_panel(area, table, &table.label())?;
            }
            root.present().map_err(plot_err)?;
        }
        other => return Err(CliError::Usage(format!("unknown figure `{other}`"))),
    }
    Ok(svg)
}

pub fn cmd_plot(args: PlotArgs) -> Result<(), CliError> {
    let tables = args
        .traces
        .iter()
        .map(|p| Table::read(p))
        .collect::<Result<Vec<_>, _>>()?;
    let svg = render(&args.figure, &tables)?;
    write_atomic(&args.out, svg.as_bytes())?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
