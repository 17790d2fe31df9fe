// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion: one numeric column, or a label column plus a numeric
//! column, with an optional header row.

use std::path::Path;

use anyhow::{bail, Context, Result};
use selfnorm_cpd::TimeSeries;
use sha2::{Digest, Sha256};

/// Selects the label column of a two-column file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IndexColumn {
    Position(usize),
    Name(String),
}

impl std::str::FromStr for IndexColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => IndexColumn::Position(i),
            Err(_) => IndexColumn::Name(s.to_string()),
        })
    }
}

#[derive(Clone, Debug)]
pub struct LoadedSeries {
    pub series: TimeSeries,
    /// Labels aligned with the observations, when the file has two columns.
    pub labels: Option<Vec<String>>,
    pub sha256: String,
}

impl LoadedSeries {
    /// Label of the 1-based observation index `k`.
    pub fn label(&self, k: usize) -> Option<String> {
        self.labels.as_ref().and_then(|l| l.get(k.checked_sub(1)?).cloned())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn load_series(path: &Path, index_column: Option<&IndexColumn>) -> Result<LoadedSeries> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_series(&bytes, index_column).with_context(|| format!("in {}", path.display()))
}

fn parse_value(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

pub fn parse_series(bytes: &[u8], index_column: Option<&IndexColumn>) -> Result<LoadedSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<(u64, csv::StringRecord)> = Vec::new();
    for record in reader.records() {
        let record = record.context("malformed CSV")?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push((line, record));
    }
    let Some((first_line, first)) = rows.first().cloned() else {
        bail!("no observations found");
    };
    let width = first.len();
    if width == 0 || width > 2 {
        bail!("line {first_line}: expected one value column or a label and a value column, found {width} columns");
    }
    if let Some((line, r)) = rows.iter().find(|(_, r)| r.len() != width) {
        bail!("line {line}: expected {width} columns, found {}", r.len());
    }
    // Header detection: the first row is a header when its value field is
    // not numeric under the default column assignment.
    let provisional_label = match index_column {
        Some(IndexColumn::Position(i)) => (*i).min(1),
        _ => 0,
    };
    let provisional_value = if width == 1 { 0 } else { 1 - provisional_label };
    let has_header = parse_value(&first[provisional_value]).is_none();
    let label_col = if width == 1 {
        if index_column.is_some() {
            bail!("--index-column needs a two-column file");
        }
        None
    } else {
        Some(match index_column {
            None => 0,
            Some(IndexColumn::Position(i)) if *i < 2 => *i,
            Some(IndexColumn::Position(i)) => bail!("index column {i} does not exist in a two-column file"),
            Some(IndexColumn::Name(name)) => {
                if !has_header {
                    bail!("index column `{name}` requested but the file has no header row");
                }
                first
                    .iter()
                    .position(|h| h == name)
                    .with_context(|| format!("no column named `{name}` in the header"))?
            }
        })
    };
    let value_col = match label_col {
        None => 0,
        Some(l) => 1 - l,
    };
    let body = if has_header { &rows[1..] } else { &rows[..] };
    let mut values = Vec::with_capacity(body.len());
    let mut labels = label_col.map(|_| Vec::with_capacity(body.len()));
    for (line, r) in body {
        let field = &r[value_col];
        match parse_value(field) {
            Some(v) if v.is_finite() => values.push(v),
            _ => bail!("line {line}: `{field}` is not a finite number"),
        }
        if let (Some(l), Some(labels)) = (label_col, labels.as_mut()) {
            labels.push(r[l].to_string());
        }
    }
    let series = TimeSeries::new(values).context("invalid series")?;
    Ok(LoadedSeries {
        series,
        labels,
        sha256: sha256_hex(bytes),
    })
}
