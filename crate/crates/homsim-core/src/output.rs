//! Result serializers: sweep tables as CSV or JSON, named curves as
//! two-column files.
//!
//! Every write goes through a temporary file in the target directory
//! followed by a rename, so a cancelled or crashed run never leaves a
//! truncated artifact at the final path. Numbers are printed in
//! scientific notation with 13 significant digits; the JSON writer is
//! exact, so a file read back deserializes to the values that were
//! written.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sweep::SweepResult;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Both,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            other => Err(Error::Config(format!(
                "unknown output format {other:?}, expected csv, json or both"
            ))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Both => "both",
        })
    }
}

impl OutputFormat {
    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

const SCALAR_COLUMNS: [&str; 8] = [
    "g2hom_pulsewise",
    "n_p",
    "n_1",
    "n_2",
    "g2hom_normalized",
    "breakdown_autocorrelation",
    "breakdown_intensity",
    "breakdown_interference",
];

fn fmt_value(v: f64) -> String {
    format!("{v:.12e}")
}

/// Flat table of a sweep: one column per axis, then the scalar
/// observables, then an error column. Failed points keep their row with
/// the parameter values filled in and the message in the last column.
pub fn sweep_csv(result: &SweepResult) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = result
        .spec
        .axes
        .iter()
        .map(|a| a.path.name().to_string())
        .collect();
    header.extend(SCALAR_COLUMNS.iter().map(|s| s.to_string()));
    header.push("error".into());
    wtr.write_record(&header)?;

    for rec in &result.records {
        let mut row: Vec<String> = rec.params.iter().map(|(_, v)| fmt_value(*v)).collect();
        match &rec.scalars {
            Some(s) => {
                row.extend(
                    [
                        s.g2hom_pulsewise,
                        s.n_p,
                        s.n_1,
                        s.n_2,
                        s.g2hom_normalized,
                        s.breakdown.autocorrelation,
                        s.breakdown.intensity,
                        s.breakdown.interference,
                    ]
                    .into_iter()
                    .map(fmt_value),
                );
                row.push(String::new());
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), SCALAR_COLUMNS.len()));
                row.push(rec.error.clone().unwrap_or_default());
            }
        }
        wtr.write_record(&row)?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep_json(result: &SweepResult) -> Result<String> {
    let mut text = serde_json::to_string_pretty(result)?;
    text.push('\n');
    Ok(text)
}

/// Write `contents` next to `path` and rename into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Write a sweep as `<stem>.csv`, `<stem>.json` or both under `dir`,
/// returning the paths produced.
pub fn write_sweep(
    dir: &Path,
    stem: &str,
    result: &SweepResult,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.wants_csv() {
        let path = dir.join(format!("{stem}.csv"));
        write_atomic(&path, sweep_csv(result)?.as_bytes())?;
        written.push(path);
    }
    if format.wants_json() {
        let path = dir.join(format!("{stem}.json"));
        write_atomic(&path, sweep_json(result)?.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// A single plottable trace with axis labels, written as a two-column
/// CSV per curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotCurve {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PlotCurve {
    pub fn new(
        name: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> Self {
        PlotCurve {
            name: name.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x,
            y,
        }
    }

    pub fn csv(&self) -> Result<String> {
        if self.x.len() != self.y.len() {
            return Err(Error::Config(format!(
                "curve {:?} has {} x values but {} y values",
                self.name,
                self.x.len(),
                self.y.len()
            )));
        }
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record([self.x_label.as_str(), self.y_label.as_str()])?;
        for (&x, &y) in self.x.iter().zip(&self.y) {
            wtr.write_record([fmt_value(x), fmt_value(y)])?;
        }
        let bytes = wtr
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Turn a curve name into a safe file stem: lowercase alphanumerics with
/// single dashes in between.
pub fn file_stem(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut dash = false;
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
            dash = false;
        } else if !dash && !out.is_empty() {
            out.push('-');
            dash = true;
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("curve");
    }
    out
}

/// Write each curve as `<prefix>-<slug>.csv` under `dir`.
pub fn write_curves(dir: &Path, prefix: &str, curves: &[PlotCurve]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for curve in curves {
        let path = dir.join(format!("{prefix}-{}.csv", file_stem(&curve.name)));
        write_atomic(&path, curve.csv()?.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
