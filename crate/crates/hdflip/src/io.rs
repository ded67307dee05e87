//! CSV ingestion of datasets and CSV/JSON output of results.
//!
//! Variables are numbered from 1 in every file and on the command line.
//! Numbers are written with 10 significant digits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use hdflip_core::combine::MaxTResult;
use hdflip_core::multisplit::PValueTable;
use hdflip_core::{DesignData, Matrix, Method, StatMatrix, SubsetResult};
use serde::Serialize;

use crate::error::{Error, Result};

/// Where the response comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseSource {
    /// A separate single-column CSV file.
    File(PathBuf),
    /// A column of the design file, by header name or 1-based position. The
    /// column is removed from the design.
    Column(String),
}

/// Parsed numeric table with an optional header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(_) = e.kind() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::Io {
                path: path.to_path_buf(),
                source: io,
            };
        }
        unreachable!()
    }
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads a numeric CSV. The first record is a header when any of its fields
/// is not a number. Non-finite numbers are rejected with their location.
pub fn read_table(path: &Path) -> Result<Table> {
    read_table_from(open(path)?, path, None)
}

/// Like [`read_table`] on any reader. `header` forces the first record to be
/// treated as a header (`Some(true)`) or as data (`Some(false)`).
pub fn read_table_from<R: Read>(reader: R, path: &Path, header_mode: Option<bool>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut cols = 0usize;
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if k == 0 && header_mode.unwrap_or_else(|| parsed.iter().any(|p| p.is_err())) {
            header = Some(record.iter().map(str::to_owned).collect());
            cols = record.len();
            continue;
        }
        if rows == 0 && header.is_none() {
            cols = record.len();
        }
        if record.len() != cols {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                message: format!("line {line}: expected {cols} fields, found {}", record.len()),
            });
        }
        for (c, (p, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            let v = p.map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                column: c + 1,
                value: raw.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    path: path.to_path_buf(),
                    line,
                    column: c + 1,
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    Ok(Table {
        header,
        rows,
        cols,
        values,
    })
}

fn column_index(spec: &str, header: Option<&[String]>, cols: usize) -> Result<usize> {
    if let Some(h) = header {
        if let Some(pos) = h.iter().position(|name| name == spec) {
            return Ok(pos);
        }
    }
    match spec.parse::<usize>() {
        Ok(k) if (1..=cols).contains(&k) => Ok(k - 1),
        _ => Err(Error::Input(format!("response column {spec:?} not found"))),
    }
}

/// Loads a design matrix and a response into validated [`DesignData`].
pub fn load_dataset(design_path: &Path, response: &ResponseSource) -> Result<DesignData> {
    let design = read_table(design_path)?;
    let (x_cols, y): (Vec<usize>, Vec<f64>) = match response {
        ResponseSource::File(path) => {
            let resp = read_table(path)?;
            if resp.cols != 1 && resp.rows > 0 {
                return Err(Error::Input(format!(
                    "{}: response file must have exactly one column, found {}",
                    path.display(),
                    resp.cols
                )));
            }
            if resp.rows != design.rows {
                return Err(Error::DimensionMismatch {
                    design_rows: design.rows,
                    response_rows: resp.rows,
                });
            }
            ((0..design.cols).collect(), resp.values)
        }
        ResponseSource::Column(spec) => {
            let c = column_index(spec, design.header.as_deref(), design.cols)?;
            let y = (0..design.rows).map(|i| design.values[i * design.cols + c]).collect();
            ((0..design.cols).filter(|&k| k != c).collect(), y)
        }
    };
    let x = Matrix::from_fn(design.rows, x_cols.len(), |i, j| {
        design.values[i * design.cols + x_cols[j]]
    });
    let names = match &design.header {
        Some(h) => x_cols.iter().map(|&c| h[c].clone()).collect(),
        None => x_cols.iter().enumerate().map(|(k, _)| format!("x{}", k + 1)).collect(),
    };
    Ok(DesignData::with_names(x, y, names)?)
}

/// Formats `v` with 10 significant digits, in the style of `%.10g`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_owned()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a statistic matrix: header of 1-based variable indices, then one
/// row per transformation (the identity first).
pub fn write_stat_matrix<W: Write>(g: &StatMatrix, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=g.m()).map(|j| j.to_string()))?;
    for b in 0..g.b() {
        w.write_record(g.row(b).into_iter().map(fmt_num))?;
    }
    w.flush()
}

pub fn save_stat_matrix(g: &StatMatrix, path: &Path) -> Result<()> {
    write_stat_matrix(g, create(path)?).map_err(io_err(path))
}

/// Reads a statistic matrix written by [`write_stat_matrix`].
pub fn load_stat_matrix(path: &Path, method: Method) -> Result<StatMatrix> {
    let t = read_table_from(open(path)?, path, Some(true))?;
    if t.rows == 0 {
        return Err(Error::Input(format!("{}: no statistic rows", path.display())));
    }
    let cols = (0..t.cols)
        .map(|j| (0..t.rows).map(|b| t.values[b * t.cols + j]).collect())
        .collect();
    Ok(StatMatrix::from_columns(t.rows, method, cols)?)
}

/// Writes one row per variable: `variable, aggregated, raw_1..raw_Q,
/// adjusted_1..adjusted_Q`.
pub fn write_pvalue_table<W: Write>(t: &PValueTable, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["variable".to_owned(), "aggregated".to_owned()];
    header.extend((1..=t.q()).map(|q| format!("raw_{q}")));
    header.extend((1..=t.q()).map(|q| format!("adjusted_{q}")));
    w.write_record(&header)?;
    for j in 0..t.m() {
        let mut rec = vec![(j + 1).to_string(), fmt_num(t.aggregated[j])];
        rec.extend(t.raw.iter().map(|row| fmt_num(row[j])));
        rec.extend(t.adjusted.iter().map(|row| fmt_num(row[j])));
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn save_pvalue_table(t: &PValueTable, path: &Path) -> Result<()> {
    write_pvalue_table(t, create(path)?).map_err(io_err(path))
}

/// JSON record of a subset test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetRecord {
    /// 1-based variable indices.
    pub subset: Vec<usize>,
    pub pvalue: f64,
    pub reject: bool,
    /// Closed-testing lower bound on true discoveries, when computed.
    pub tdp_bound: Option<usize>,
}

impl SubsetRecord {
    pub fn new(r: &SubsetResult, tdp_bound: Option<usize>) -> Self {
        SubsetRecord {
            subset: r.subset.iter().map(|j| j + 1).collect(),
            pvalue: r.pvalue,
            reject: r.reject,
            tdp_bound,
        }
    }
}

/// JSON record of a maxT analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxTRecord {
    pub adjusted: Vec<f64>,
    /// 1-based variable indices.
    pub rejected: Vec<usize>,
    pub step_down: bool,
}

impl MaxTRecord {
    pub fn new(r: &MaxTResult, step_down: bool) -> Self {
        MaxTRecord {
            adjusted: r.adjusted.clone(),
            rejected: r.rejected.iter().map(|j| j + 1).collect(),
            step_down,
        }
    }
}

/// Parses a 1-based, comma-separated subset such as `1,4,7` or ranges like
/// `2-5`; `all` selects every variable. Returns 0-based indices.
pub fn parse_subset(spec: &str, m: usize) -> Result<Vec<usize>> {
    if spec.trim() == "all" {
        return Ok((0..m).collect());
    }
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::Input(format!("invalid subset element {part:?}"));
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (
                a.trim().parse::<usize>().map_err(|_| bad())?,
                b.trim().parse::<usize>().map_err(|_| bad())?,
            ),
            None => {
                let v = part.parse::<usize>().map_err(|_| bad())?;
                (v, v)
            }
        };
        if lo == 0 || hi < lo || hi > m {
            return Err(Error::Input(format!("subset element {part:?} outside 1..={m}")));
        }
        out.extend(lo - 1..hi);
    }
    if out.is_empty() {
        return Err(Error::Input("empty subset".to_owned()));
    }
    Ok(out)
}
