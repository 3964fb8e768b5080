//! Experiment reports: tables, rate fits, verdicts and their CSV/JSON/SVG renderings.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const SCHEMA: &str = "kondra-report/1";

/// Smallest R² accepted without a LOW-CONFIDENCE flag.
pub const MIN_R2: f64 = 0.98;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:.12e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A result table; every table has `level` and `dof` columns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Table {
        assert!(
            columns.contains(&"level") && columns.contains(&"dof"),
            "table '{name}' lacks level/dof columns"
        );
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width in table '{}'", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column (integers widened, text skipped).
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter_map(|r| match &r[c] {
                Cell::Int(v) => Some(*v as f64),
                Cell::Num(v) => Some(*v),
                Cell::Text(_) => None,
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Io(e.into());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string())).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Least-squares line `y = slope x + intercept` with its coefficient of determination.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub name: String,
    pub x: String,
    pub y: String,
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub low_confidence: bool,
    pub flag: Option<String>,
}

impl Fit {
    pub fn least_squares(name: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> Result<Fit> {
        if xs.len() != ys.len() || xs.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "rate fit '{name}' needs at least 3 points, got {}",
                xs.len().min(ys.len())
            )));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate fit '{name}' has non-finite data"
            )));
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rate fit '{name}' has a degenerate abscissa"
            )));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
        let low_confidence = r2 < MIN_R2;
        Ok(Fit {
            name: name.to_string(),
            x: x_label.to_string(),
            y: y_label.to_string(),
            points: xs.len(),
            slope,
            intercept,
            r2,
            low_confidence,
            flag: low_confidence.then(|| "LOW-CONFIDENCE".to_string()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub subject: String,
    pub value: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Fitted line in the plotted coordinates.
    pub line: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub experiment: String,
    pub status: Status,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub tables: Vec<Table>,
    pub fits: Vec<Fit>,
    pub classifications: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub timings: Vec<Timing>,
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub plots: Vec<Plot>,
}

impl Report {
    pub fn new(config: &ExperimentConfig) -> Report {
        Report {
            schema: SCHEMA,
            experiment: config.kind.name().to_string(),
            status: Status::Ok,
            error: None,
            config: config.clone(),
            tables: Vec::new(),
            fits: Vec::new(),
            classifications: Vec::new(),
            warnings: Vec::new(),
            timings: Vec::new(),
            artifacts: Vec::new(),
            plots: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn verdict(&self, subject: &str) -> Option<&Verdict> {
        self.classifications.iter().find(|v| v.subject == subject)
    }

    pub fn classify(&mut self, subject: impl Into<String>, value: impl fmt::Display, detail: impl Into<String>) {
        self.classifications.push(Verdict {
            subject: subject.into(),
            value: value.to_string(),
            detail: detail.into(),
        });
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn timed<R>(&mut self, stage: &str, f: impl FnOnce(&mut Report) -> Result<R>) -> Result<R> {
        let start = Instant::now();
        let out = f(self);
        self.timings.push(Timing {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn fail(&mut self, err: &Error) {
        self.status = Status::Failed;
        self.error = Some(err.to_string());
    }

    /// Writes `<table>.csv`, `<plot>.svg` (when enabled) and `report.json` into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for t in &self.tables {
            let name = format!("{}.csv", t.name);
            fs::write(dir.join(&name), t.to_csv()?)?;
            self.artifacts.push(name);
        }
        if self.config.output.svg {
            for p in &self.plots {
                let name = format!("{}.svg", p.name);
                fs::write(dir.join(&name), render_svg(p))?;
                self.artifacts.push(name);
            }
        }
        self.artifacts.push("report.json".into());
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(dir.join("report.json"), json)?;
        Ok(())
    }
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 60.0);
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter plot with a log-scaled y axis (and x axis when `log_x`) plus fitted lines.
pub fn render_svg(p: &Plot) -> String {
    let tx = |x: f64| if p.log_x { x.log10() } else { x };
    let pts: Vec<(f64, f64)> = p
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(x, y)| y > 0.0 && (!p.log_x || x > 0.0))
        .map(|(x, y)| (tx(x), y.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    if y1 - y0 < 1e-12 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let (pad_x, pad_y) = (0.05 * (x1 - x0), 0.05 * (y1 - y0));
    let (x0, x1, y0, y1) = (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y);
    let (ml, mr, mt, mb) = MARGIN;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (W - ml - mr);
    let sy = |y: f64| H - mb - (y - y0) / (y1 - y0) * (H - mt - mb);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += &format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - ml - mr,
        H - mt - mb
    );
    s += &format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        xml_escape(&p.title)
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let xl = if p.log_x {
            format!("{:.2e}", 10f64.powf(xv))
        } else {
            format!("{xv:.2}")
        };
        s += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{xl}</text>\n",
            sx(xv),
            H - mb + 16.0
        );
        s += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{:.2e}</text>\n",
            ml - 4.0,
            sy(yv) + 4.0,
            10f64.powf(yv)
        );
    }
    s += &format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (ml + W - mr) / 2.0,
        H - 16.0,
        xml_escape(&p.x_label)
    );
    s += &format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (mt + H - mb) / 2.0,
        (mt + H - mb) / 2.0,
        xml_escape(&p.y_label)
    );
    for (i, series) in p.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for &(x, y) in &series.points {
            if y > 0.0 && (!p.log_x || x > 0.0) {
                s += &format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{color}\"/>\n",
                    sx(tx(x)),
                    sy(y.log10())
                );
            }
        }
        if let Some((slope, intercept)) = series.line {
            let ya = slope * x0 + intercept;
            let yb = slope * x1 + intercept;
            s += &format!(
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-dasharray=\"6 3\" clip-path=\"url(#plot)\"/>\n",
                sx(x0),
                sy(ya),
                sx(x1),
                sy(yb)
            );
        }
        s += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\">{}</text>\n",
            ml + 10.0,
            mt + 16.0 * (i + 1) as f64,
            xml_escape(&series.name)
        );
    }
    s += &format!(
        "<clipPath id=\"plot\"><rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\"/></clipPath>\n",
        W - ml - mr,
        H - mt - mb
    );
    s += "</svg>\n";
    s
}
