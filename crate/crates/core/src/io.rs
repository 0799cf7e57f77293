//! CSV ingestion and result files.
//!
//! First-stage files carry a header `t,ref_1,...,ref_r` and one row of
//! reference responses per time step; second-stage files carry `t,y0`. Time
//! indices must be strictly increasing and the two files must share them.
//! Header cells after `t` that parse as numbers are taken as the reference
//! values themselves.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::CalibrationPosterior;

/// First-stage responses, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pub t: Vec<f64>,
    /// Reference values parsed from the header, when every column name is numeric.
    pub header_refs: Option<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondStage {
    pub t: Vec<f64>,
    pub y0: Vec<f64>,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn csv_error(name: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let (column, message) = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => (
            *len as usize,
            format!("expected {expected_len} fields, found {len}"),
        ),
        csv::ErrorKind::Utf8 { err, .. } => (err.field() + 1, "invalid UTF-8".to_string()),
        _ => (0, e.to_string()),
    };
    Error::Parse {
        file: name.to_string(),
        line,
        column,
        message,
    }
}

/// Numeric rows of a headed CSV with the time column first. Returns the
/// header, the time column and the remaining values of each row.
fn parse_table<R: Read>(reader: R, name: &str, min_cols: usize) -> Result<(Vec<String>, Vec<f64>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(name, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < min_cols || !header[0].eq_ignore_ascii_case("t") {
        return Err(Error::Parse {
            file: name.to_string(),
            line: 1,
            column: 1,
            message: format!("header must start with `t` and have at least {min_cols} columns"),
        });
    }
    let mut ts = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut vals = Vec::with_capacity(rec.len());
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                file: name.to_string(),
                line,
                column: k + 1,
                message: format!("`{field}` in column `{}` is not a number", header[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    file: name.to_string(),
                    line,
                    column: k + 1,
                    message: format!("non-finite value in column `{}`", header[k]),
                });
            }
            vals.push(v);
        }
        let t = vals.remove(0);
        if let Some(&prev) = ts.last() {
            if t <= prev {
                return Err(Error::InputOrder {
                    file: name.to_string(),
                    line,
                    prev,
                    got: t,
                });
            }
        }
        ts.push(t);
        rows.push(vals);
    }
    if ts.is_empty() {
        return Err(Error::Parse {
            file: name.to_string(),
            line: 2,
            column: 1,
            message: "no data rows".into(),
        });
    }
    Ok((header, ts, rows))
}

pub fn parse_first_stage<R: Read>(reader: R, name: &str) -> Result<FirstStage> {
    let (header, t, ys) = parse_table(reader, name, 4)?;
    let header_refs: Option<Vec<f64>> = header[1..].iter().map(|h| h.parse().ok()).collect();
    Ok(FirstStage { t, header_refs, ys })
}

pub fn parse_second_stage<R: Read>(reader: R, name: &str) -> Result<SecondStage> {
    let (header, t, rows) = parse_table(reader, name, 2)?;
    if header.len() != 2 {
        return Err(Error::Parse {
            file: name.to_string(),
            line: 1,
            column: 3,
            message: "second-stage file has exactly the columns `t,y0`".into(),
        });
    }
    Ok(SecondStage {
        t,
        y0: rows.into_iter().map(|r| r[0]).collect(),
    })
}

pub fn read_first_stage(path: &Path) -> Result<FirstStage> {
    let f = fs::File::open(path).map_err(|e| io_error(path, e))?;
    parse_first_stage(f, &path.display().to_string())
}

pub fn read_second_stage(path: &Path) -> Result<SecondStage> {
    let f = fs::File::open(path).map_err(|e| io_error(path, e))?;
    parse_second_stage(f, &path.display().to_string())
}

/// Checks that both stages cover the same time indices.
pub fn check_aligned(first: &FirstStage, second: &SecondStage, second_name: &str) -> Result<()> {
    for (i, (a, b)) in first.t.iter().zip(&second.t).enumerate() {
        if a != b {
            return Err(Error::Parse {
                file: second_name.to_string(),
                line: i as u64 + 2,
                column: 1,
                message: format!("time index {b} does not match first-stage time {a}"),
            });
        }
    }
    if first.t.len() != second.t.len() {
        return Err(Error::Parse {
            file: second_name.to_string(),
            line: first.t.len().min(second.t.len()) as u64 + 2,
            column: 1,
            message: format!(
                "{} second-stage rows for {} first-stage rows",
                second.t.len(),
                first.t.len()
            ),
        });
    }
    Ok(())
}

/// Posterior summaries as CSV: `t,median,lo95,hi95,flags`, plus a `truth`
/// column before `flags` when given.
pub fn posterior_csv(t: &[f64], posts: &[CalibrationPosterior], truth: Option<&[f64]>) -> String {
    let mut out = String::from("t,median,lo95,hi95");
    if truth.is_some() {
        out.push_str(",truth");
    }
    out.push_str(",flags\n");
    for (i, (t, p)) in t.iter().zip(posts).enumerate() {
        let _ = write!(out, "{t},{},{},{}", p.median, p.lower95, p.upper95);
        if let Some(x) = truth {
            let _ = write!(out, ",{}", x[i]);
        }
        let _ = writeln!(out, ",{}", p.flags.label());
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    s.push('\n');
    write_text(path, &s)
}
