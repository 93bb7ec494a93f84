//! CSV dataset reading and table/sample writers.
//!
//! Datasets are header-addressed: columns `w1..wd` (required, contiguous
//! numbering from 1), plus any of `y`, `u`, `delta`, and `s1..sk`. Biomarker
//! cells may be blank, and a row's biomarker vector must be entirely present
//! or entirely blank. All other cells must parse as floats.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use normtest_core::estimators::TwoPhaseRecord;
use normtest_core::testkit::CalibrationResult;

use crate::error::CliError;
use crate::harness::ExperimentTable;

/// A parsed dataset. Presence of the optional columns decides which
/// estimators it can feed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub d: usize,
    /// Row-major n x d covariate block.
    pub w: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    pub s_dim: usize,
    /// Per-row biomarker vectors; `None` marks a blank row. Present exactly
    /// when `s_dim > 0`.
    pub s: Option<Vec<Option<Vec<f64>>>>,
}

#[derive(Clone, Copy)]
enum Col {
    Y,
    U,
    Delta,
    W(usize),
    S(usize),
}

fn classify_header(name: &str) -> Result<Col, CliError> {
    match name {
        "y" => return Ok(Col::Y),
        "u" => return Ok(Col::U),
        "delta" => return Ok(Col::Delta),
        _ => {}
    }
    let indexed = |prefix: &str| -> Option<usize> {
        let digits = name.strip_prefix(prefix)?;
        let k: usize = digits.parse().ok()?;
        if k >= 1 && !digits.starts_with('0') {
            Some(k - 1)
        } else {
            None
        }
    };
    if let Some(j) = indexed("w") {
        return Ok(Col::W(j));
    }
    if let Some(j) = indexed("s") {
        return Ok(Col::S(j));
    }
    Err(CliError::Data(format!(
        "unrecognized column `{name}` (expected y, u, delta, w1..wd, or s1..sk)"
    )))
}

// Columns must cover 1..=count with no duplicates.
fn check_contiguous(kind: &str, seen: &[bool]) -> Result<(), CliError> {
    for (j, present) in seen.iter().enumerate() {
        if !present {
            return Err(CliError::Data(format!(
                "column {kind}{} is missing while {kind}{} exists",
                j + 1,
                seen.len()
            )));
        }
    }
    Ok(())
}

/// Parses a dataset from any reader. [`read_dataset`] wraps it for files.
pub fn parse_dataset<R: Read>(reader: R) -> Result<Dataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();

    let mut cols = Vec::with_capacity(headers.len());
    let mut w_max = 0usize;
    let mut s_max = 0usize;
    for name in headers.iter() {
        let col = classify_header(name)?;
        match col {
            Col::W(j) => w_max = w_max.max(j + 1),
            Col::S(j) => s_max = s_max.max(j + 1),
            _ => {}
        }
        cols.push(col);
    }
    let mut w_seen = vec![false; w_max];
    let mut s_seen = vec![false; s_max];
    let mut y_seen = false;
    let mut u_seen = false;
    let mut delta_seen = false;
    for (col, name) in cols.iter().zip(headers.iter()) {
        let duplicate = match col {
            Col::Y => std::mem::replace(&mut y_seen, true),
            Col::U => std::mem::replace(&mut u_seen, true),
            Col::Delta => std::mem::replace(&mut delta_seen, true),
            Col::W(j) => std::mem::replace(&mut w_seen[*j], true),
            Col::S(j) => std::mem::replace(&mut s_seen[*j], true),
        };
        if duplicate {
            return Err(CliError::Data(format!("duplicate column `{name}`")));
        }
    }
    if w_max == 0 {
        return Err(CliError::Data("no w columns found".into()));
    }
    check_contiguous("w", &w_seen)?;
    check_contiguous("s", &s_seen)?;

    let d = w_max;
    let s_dim = s_max;
    let mut w = Vec::new();
    let mut y = y_seen.then(Vec::new);
    let mut u = u_seen.then(Vec::new);
    let mut delta = delta_seen.then(Vec::new);
    let mut s = (s_dim > 0).then(Vec::new);
    let mut n = 0usize;

    let mut w_row = vec![0.0; d];
    let mut s_row: Vec<Option<f64>> = vec![None; s_dim];
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        s_row.iter_mut().for_each(|v| *v = None);
        for (field, (col, name)) in record.iter().zip(cols.iter().zip(headers.iter())) {
            if let Col::S(j) = col {
                if field.is_empty() {
                    continue;
                }
                s_row[*j] = Some(parse_cell(field, name, i)?);
                continue;
            }
            let value = parse_cell(field, name, i)?;
            match col {
                Col::Y => y.as_mut().unwrap().push(value),
                Col::U => u.as_mut().unwrap().push(value),
                Col::Delta => delta.as_mut().unwrap().push(value),
                Col::W(j) => w_row[*j] = value,
                Col::S(_) => unreachable!(),
            }
        }
        w.extend_from_slice(&w_row);
        if let Some(rows) = s.as_mut() {
            let present = s_row.iter().filter(|v| v.is_some()).count();
            let row = if present == 0 {
                None
            } else if present == s_dim {
                Some(s_row.iter().map(|v| v.unwrap()).collect())
            } else {
                return Err(CliError::Data(format!(
                    "row {} has a partially blank biomarker vector",
                    i + 1
                )));
            };
            rows.push(row);
        }
        n += 1;
    }

    Ok(Dataset {
        n,
        d,
        w,
        y,
        u,
        delta,
        s_dim,
        s,
    })
}

fn parse_cell(field: &str, name: &str, row: usize) -> Result<f64, CliError> {
    if field.is_empty() {
        return Err(CliError::Data(format!(
            "empty value in column `{name}`, row {}",
            row + 1
        )));
    }
    field.parse().map_err(|_| {
        CliError::Data(format!(
            "`{field}` in column `{name}`, row {} is not a number",
            row + 1
        ))
    })
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    parse_dataset(fs::File::open(path)?)
}

fn require_binary(values: &[f64], what: &str, row: usize) -> Result<bool, CliError> {
    let v = values[row];
    if v == 0.0 || v == 1.0 {
        Ok(v == 1.0)
    } else {
        Err(CliError::Data(format!(
            "{what} must be 0 or 1, row {} has {v}",
            row + 1
        )))
    }
}

impl Dataset {
    /// Assembles two-phase records, enforcing that biomarkers are present
    /// exactly on the delta = 1 rows.
    pub fn two_phase_records(&self) -> Result<Vec<TwoPhaseRecord>, CliError> {
        let y = self
            .y
            .as_ref()
            .ok_or_else(|| CliError::Data("two-phase data needs a y column".into()))?;
        let delta = self
            .delta
            .as_ref()
            .ok_or_else(|| CliError::Data("two-phase data needs a delta column".into()))?;
        let s = self
            .s
            .as_ref()
            .ok_or_else(|| CliError::Data("two-phase data needs s columns".into()))?;
        let mut records = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let observed = require_binary(delta, "delta", i)?;
            let outcome = require_binary(y, "y", i)?;
            let s_tilde = match (observed, &s[i]) {
                (true, Some(v)) => Some(v.clone()),
                (false, None) => None,
                (true, None) => {
                    return Err(CliError::Data(format!(
                        "row {} has delta = 1 but blank biomarkers",
                        i + 1
                    )))
                }
                (false, Some(_)) => {
                    return Err(CliError::Data(format!(
                        "row {} has delta = 0 but observed biomarkers",
                        i + 1
                    )))
                }
            };
            records.push(TwoPhaseRecord {
                w: self.w[i * self.d..(i + 1) * self.d].to_vec(),
                s_tilde,
                delta: observed,
                y: outcome,
            });
        }
        Ok(records)
    }
}

/// Rate table as CSV, one row per test. Floats use the shortest
/// round-trippable form, so output is byte-stable across platforms.
pub fn table_to_csv(table: &ExperimentTable) -> String {
    let mut out = String::from("test,setting,n,d,rho,reps,reject_rate,ci_lo,ci_hi\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.test.name(),
            r.setting,
            r.n,
            r.d,
            r.rho,
            r.reps,
            r.reject_rate,
            r.ci_lo,
            r.ci_hi
        );
    }
    out
}

/// Calibration null sample as CSV for external plotting, ascending.
pub fn calibration_to_csv(calib: &CalibrationResult) -> String {
    let mut out = String::from("index,z\n");
    for (i, z) in calib.null_z_sorted.iter().enumerate() {
        let _ = writeln!(out, "{i},{z}");
    }
    out
}

/// Writes to the path when given, stdout otherwise.
pub fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}
