//! CSV and JSON files: input streams, generated series, traces and reports.

use std::fs;
use std::io::Write;
use std::path::Path;

use adavaw_core::RegretReport;
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, io_err, HarnessError, Result};

/// One row of `trace.csv`. `theta` is empty when the ground truth is unknown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub y: f64,
    pub theta: Option<f64>,
    pub prediction: f64,
    pub restarted: bool,
    pub bin_id: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct InputRow {
    t: usize,
    y: f64,
    #[serde(default)]
    theta: Option<f64>,
}

/// A stream read from disk: observations and, when present, the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub y: Vec<f64>,
    pub theta: Option<Vec<f64>>,
}

/// Reads `t,y[,theta]` with 1-based, consecutive `t`.
pub fn read_stream(path: &Path) -> Result<Stream> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    if headers.get(0) != Some("t") || headers.get(1) != Some("y") {
        return Err(HarnessError::config(format!(
            "{}: header must start with t,y",
            path.display()
        )));
    }
    let has_theta = headers.iter().any(|h| h == "theta");
    let mut y = Vec::new();
    let mut theta = Vec::new();
    for (i, row) in rdr.deserialize::<InputRow>().enumerate() {
        let row = row.map_err(csv_err(path))?;
        if row.t != i + 1 {
            return Err(HarnessError::config(format!(
                "{}: expected t = {} on data row {}, found {}",
                path.display(),
                i + 1,
                i + 1,
                row.t
            )));
        }
        y.push(row.y);
        if has_theta {
            theta.push(row.theta.ok_or_else(|| {
                HarnessError::config(format!("{}: missing theta at t = {}", path.display(), row.t))
            })?);
        }
    }
    if y.is_empty() {
        return Err(HarnessError::config(format!("{}: no data rows", path.display())));
    }
    Ok(Stream {
        y,
        theta: has_theta.then_some(theta),
    })
}

/// `t,theta[,y]` as CSV bytes.
pub fn series_csv(theta: &[f64], y: Option<&[f64]>) -> Vec<u8> {
    let mut out = String::from(if y.is_some() { "t,theta,y\n" } else { "t,theta\n" });
    for (i, th) in theta.iter().enumerate() {
        match y {
            Some(y) => out.push_str(&format!("{},{th},{}\n", i + 1, y[i])),
            None => out.push_str(&format!("{},{th}\n", i + 1)),
        }
    }
    out.into_bytes()
}

pub fn write_series(path: &Path, theta: &[f64], y: Option<&[f64]>) -> Result<()> {
    write_atomic(path, &series_csv(theta, y))
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut buf = csv::Writer::from_writer(Vec::new());
    for r in rows {
        buf.serialize(r).map_err(csv_err(path))?;
    }
    let bytes = buf.into_inner().map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    write_atomic(path, &bytes)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    rdr.deserialize()
        .map(|r| r.map_err(csv_err(path)))
        .collect()
}

pub fn write_report(path: &Path, report: &RegretReport) -> Result<()> {
    write_json(path, report)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push(b'\n');
    write_atomic(path, &text)
}

/// Writes through a sibling temporary file and a rename, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}
