//! CSV ingestion with label and categorical preprocessing.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::dataset::{format_float, ColumnKind, ColumnMeta, Dataset, Mode};
use crate::error::{Error, Result};

/// A dataset with every row in group 1, plus what preprocessing did.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub dataset: Dataset,
    pub log: Vec<String>,
}

/// Most frequent value, ties to the one seen first.
fn mode_value(cells: &[String]) -> (&str, usize) {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (i, c) in cells.iter().enumerate() {
        counts.entry(c.as_str()).or_insert((0, i)).0 += 1;
    }
    let (v, (count, _)) = counts
        .into_iter()
        .min_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)))
        .expect("nonempty column");
    (v, count)
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn ingest_csv(path: &Path, label_column: &str, mode: Mode) -> Result<Ingested> {
    let file = File::open(path)?;
    ingest_reader(file, label_column, mode)
}

/// Reads a headed CSV. The label column becomes the labels and every other
/// column a feature.
///
/// - Binary labels: the most frequent class is 1, every other class 0.
/// - Regression labels: min-max scaled to `[0,1]`.
/// - A column with no numeric cell is categorical: its most frequent value
///   becomes 1 and the rest 0.
/// - A column mixing numbers with anything else, or containing an empty
///   cell, is an error at the first offending cell.
///
/// Rows in error messages are 1-based data rows, not counting the header.
pub fn ingest_reader<R: Read>(reader: R, label_column: &str, mode: Mode) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            Error::InvalidParameter(format!("label column `{label_column}` not found in header"))
        })?;
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (j, col) in cells.iter_mut().enumerate() {
            col.push(rec.get(j).unwrap_or("").trim().to_string());
        }
    }
    let n = cells[0].len();
    if n == 0 {
        return Err(Error::InvalidDataset("no data rows".into()));
    }
    let mut log = Vec::new();

    let labels = ingest_labels(&cells[label_idx], &header[label_idx], mode, &mut log)?;

    let mut features = vec![Vec::with_capacity(header.len() - 1); n];
    let mut columns = Vec::with_capacity(header.len() - 1);
    for (j, name) in header.iter().enumerate() {
        if j == label_idx {
            continue;
        }
        let col = &cells[j];
        if let Some(row) = col.iter().position(|c| c.is_empty()) {
            return Err(Error::Cell {
                row: row + 1,
                column: name.clone(),
                reason: "empty cell".into(),
            });
        }
        let parsed: Vec<Option<f64>> = col.iter().map(|c| parse_number(c)).collect();
        let numeric = parsed.iter().filter(|v| v.is_some()).count();
        let (values, kind) = if numeric == n {
            let values: Vec<f64> = parsed.into_iter().flatten().collect();
            let mut distinct: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
            distinct.sort_unstable();
            distinct.dedup();
            let kind = if distinct.len() == 2 {
                ColumnKind::Binary
            } else {
                ColumnKind::Numeric
            };
            (values, kind)
        } else if numeric == 0 {
            let (top, count) = mode_value(col);
            log.push(format!(
                "column `{name}`: categorical, `{top}` ({count} of {n} rows) -> 1, other values -> 0"
            ));
            (
                col.iter().map(|c| f64::from(u8::from(c == top))).collect(),
                ColumnKind::CategoricalCollapsed,
            )
        } else {
            let row = parsed
                .iter()
                .position(Option::is_none)
                .expect("mixed column");
            return Err(Error::Cell {
                row: row + 1,
                column: name.clone(),
                reason: format!("`{}` is not a finite number in a numeric column", col[row]),
            });
        };
        for (r, v) in features.iter_mut().zip(values) {
            r.push(v);
        }
        columns.push(ColumnMeta {
            name: name.clone(),
            kind,
        });
    }
    let dataset = Dataset::new(features, labels, vec![1; n], 1, mode, Some(columns))?;
    Ok(Ingested { dataset, log })
}

fn ingest_labels(
    col: &[String],
    name: &str,
    mode: Mode,
    log: &mut Vec<String>,
) -> Result<Vec<f64>> {
    if let Some(row) = col.iter().position(|c| c.is_empty()) {
        return Err(Error::Cell {
            row: row + 1,
            column: name.into(),
            reason: "empty label".into(),
        });
    }
    match mode {
        Mode::Binary => {
            let (top, count) = mode_value(col);
            if count == col.len() {
                return Err(Error::InvalidDataset(format!(
                    "label column `{name}` is constant"
                )));
            }
            log.push(format!(
                "label `{name}`: most common class `{top}` ({count} of {} rows) -> 1, other classes -> 0",
                col.len()
            ));
            Ok(col.iter().map(|c| f64::from(u8::from(c == top))).collect())
        }
        Mode::Regression => {
            let mut ys = Vec::with_capacity(col.len());
            for (row, c) in col.iter().enumerate() {
                ys.push(parse_number(c).ok_or_else(|| Error::Cell {
                    row: row + 1,
                    column: name.into(),
                    reason: format!("`{c}` is not a finite number"),
                })?);
            }
            let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                return Err(Error::InvalidDataset(format!(
                    "label column `{name}` is constant"
                )));
            }
            log.push(format!(
                "label `{name}`: min-max scaled from [{}, {}] to [0, 1] before truncation",
                format_float(lo),
                format_float(hi)
            ));
            Ok(ys
                .iter()
                .map(|y| ((y - lo) / (hi - lo)).clamp(0.0, 1.0))
                .collect())
        }
    }
}
