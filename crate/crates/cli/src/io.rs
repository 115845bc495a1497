//! CSV tables and JSON manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use mapsieve::estimator::RegressionData;

use crate::config::DataSection;
use crate::error::{CliError, CliResult};

/// 17 significant digits, enough to round-trip every `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let csv_err = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A CSV file held as strings.
pub struct Table {
    pub path: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => CliError::io(path, io),
                other => CliError::ingest(path, None, None, format!("{other:?}")),
            })?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::ingest(path, None, None, e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| CliError::ingest(path, Some(k + 1), None, e.to_string()))?;
            rows.push(rec);
        }
        Ok(Self {
            path: path.to_owned(),
            headers,
            rows,
        })
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> CliResult<usize> {
        self.position(name)
            .ok_or_else(|| CliError::ingest(&self.path, None, Some(name), "missing column"))
    }

    pub fn strings(&self, name: &str) -> CliResult<Vec<String>> {
        let c = self.require(name)?;
        Ok(self.rows.iter().map(|r| r.get(c).unwrap_or("").to_owned()).collect())
    }

    /// Finite numbers in column `name`.
    pub fn floats(&self, name: &str) -> CliResult<Vec<f64>> {
        let c = self.require(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let s = r.get(c).unwrap_or("");
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    Ok(_) => Err(CliError::ingest(&self.path, Some(k + 1), Some(name), format!("non-finite value `{s}`"))),
                    Err(_) => Err(CliError::ingest(&self.path, Some(k + 1), Some(name), format!("cannot parse `{s}` as a number"))),
                }
            })
            .collect()
    }
}

/// Regression rows from a CSV file: a single series with `ar_lags`, or a
/// response column with covariates `<prefix>1..<prefix>r`.
pub fn load_data(data: &DataSection) -> CliResult<RegressionData<f64>> {
    let path = data
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("no input file (use --input or [data].input)".into()))?;
    let table = Table::read(path)?;
    if table.rows.is_empty() {
        return Err(CliError::ingest(path, None, None, "no data rows"));
    }
    match data.ar_lags {
        Some(r) => {
            let series = table.floats(&data.series_column)?;
            Ok(RegressionData::autoregressive(&series, r)?)
        }
        None => {
            let y = table.floats(&data.response_column)?;
            let mut x = Vec::new();
            loop {
                let name = format!("{}{}", data.covariate_prefix, x.len() + 1);
                if table.position(&name).is_none() {
                    break;
                }
                x.push(table.floats(&name)?);
            }
            if x.is_empty() {
                let first = format!("{}1", data.covariate_prefix);
                return Err(CliError::ingest(path, None, Some(&first), "missing column"));
            }
            Ok(RegressionData::new(y, x)?)
        }
    }
}
