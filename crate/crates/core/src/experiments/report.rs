use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::carleson::CarlesonNorm;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Truncation {
    pub r_min: Option<f64>,
}

/// One CSV row; missing densities are written as empty fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleRow {
    pub x: [f64; 2],
    pub r: f64,
    pub beta: Option<f64>,
    pub gamma2: Option<f64>,
    pub alpha2_sq: Option<f64>,
    pub tilde_alpha_sq: Option<f64>,
    pub weight: f64,
}

/// A named table written as whitespace-separated plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Scenario outcome. Only the serialized fields go to `summary.json`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub scenario: String,
    pub params: BTreeMap<String, String>,
    pub carleson_norm: Option<f64>,
    pub argmax_center: Option<Vec<f64>>,
    pub argmax_radius: Option<f64>,
    pub fitted_constants: BTreeMap<String, f64>,
    pub truncation: Truncation,
    pub checks: Vec<Check>,
    pub headline: BTreeMap<String, f64>,
    pub provenance: BTreeMap<String, String>,
    #[serde(skip)]
    pub d: usize,
    #[serde(skip)]
    pub samples: Vec<SampleRow>,
    #[serde(skip)]
    pub series: Vec<Series>,
}

impl Report {
    pub fn new(scenario: &str, d: usize) -> Self {
        Self { scenario: scenario.into(), d, ..Default::default() }
    }

    pub fn check(&mut self, name: impl Into<String>, value: f64, bound: f64, pass: bool) {
        self.checks.push(Check { name: name.into(), value, bound, pass });
    }

    pub fn headline(&mut self, key: impl Into<String>, value: f64) {
        self.headline.insert(key.into(), value);
    }

    pub fn provenance(&mut self, key: impl Into<String>, value: impl ToString) {
        self.provenance.insert(key.into(), value.to_string());
    }

    pub fn set_norm(&mut self, norm: &CarlesonNorm, d: usize) {
        self.carleson_norm = Some(norm.norm);
        self.argmax_center = Some(norm.argmax.center[..d].to_vec());
        self.argmax_radius = Some(norm.argmax.radius);
        self.truncation.r_min = Some(norm.r_min);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    GnuplotData,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::GnuplotData];
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(report: &Report, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut header: Vec<&str> = if report.d == 2 { vec!["x1", "x2"] } else { vec!["x1"] };
    header.extend(["r", "beta", "gamma2", "alpha2_sq", "tilde_alpha_sq", "weight"]);
    w.write_record(&header).map_err(csv_error)?;
    for s in &report.samples {
        let mut rec: Vec<String> = s.x[..report.d.max(1)].iter().map(f64::to_string).collect();
        rec.push(s.r.to_string());
        rec.extend([opt(s.beta), opt(s.gamma2), opt(s.alpha2_sq), opt(s.tilde_alpha_sq)]);
        rec.push(s.weight.to_string());
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_series(series: &Series, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "# {}", series.columns.join(" "))?;
    for row in &series.rows {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(f, "{}", line.join(" "))?;
    }
    f.flush()?;
    Ok(())
}

/// Writes `samples.csv`, `summary.json` and one `<series>.dat` per series
/// into `dir` (created if missing). Returns the written paths.
pub fn emit(report: &Report, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            Format::Csv => {
                let p = dir.join("samples.csv");
                write_csv(report, &p)?;
                written.push(p);
            }
            Format::Json => {
                let p = dir.join("summary.json");
                let mut text = serde_json::to_string_pretty(report)?;
                text.push('\n');
                fs::write(&p, text)?;
                written.push(p);
            }
            Format::GnuplotData => {
                for s in &report.series {
                    let p = dir.join(format!("{}.dat", s.name));
                    write_series(s, &p)?;
                    written.push(p);
                }
            }
        }
    }
    Ok(written)
}
