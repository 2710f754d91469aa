//! Tabular datasets with a single group assignment per row.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label regime of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Labels and classifications in {0,1}.
    Binary,
    /// Labels in [0,1], real-valued predictions, squared error.
    Regression,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Mode::Binary),
            "regression" => Ok(Mode::Regression),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode `{other}` (expected binary or regression)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Numeric,
    /// Numeric column with exactly two distinct values.
    Binary,
    /// Categorical column collapsed to most-frequent-vs-rest.
    CategoricalCollapsed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnMeta {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
        }
    }
}

/// Feature matrix, labels and 1-based group indices for `n` rows.
///
/// Construction does not validate; call [`Dataset::validate`] (or
/// [`Dataset::ensure_valid`]) before handing a dataset to a solver. Solvers in
/// this crate do that themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    groups: Vec<usize>,
    num_groups: usize,
    mode: Mode,
    columns: Vec<ColumnMeta>,
    allow_empty_groups: bool,
}

/// A single broken invariant, located by row and/or column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub row: Option<usize>,
    pub column: Option<String>,
    pub rule: Rule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    RowCountMismatch,
    RowWidthMismatch,
    ColumnMetaMismatch,
    NonFiniteFeature,
    LabelNotBinary,
    LabelOutOfRange,
    GroupOutOfRange,
    EmptyGroup,
    NoGroups,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.rule {
            Rule::RowCountMismatch => "features, labels and groups differ in length",
            Rule::RowWidthMismatch => "row width differs from column count",
            Rule::ColumnMetaMismatch => "column metadata count differs from feature width",
            Rule::NonFiniteFeature => "feature is not finite",
            Rule::LabelNotBinary => "label not in {0,1}",
            Rule::LabelOutOfRange => "label not in [0,1]",
            Rule::GroupOutOfRange => "group out of range",
            Rule::EmptyGroup => "group has no rows",
            Rule::NoGroups => "group count is zero",
        };
        match (&self.row, &self.column) {
            (Some(r), Some(c)) => write!(f, "row {r}, column `{c}`: {what}"),
            (Some(r), None) => write!(f, "row {r}: {what}"),
            (None, Some(c)) => write!(f, "column `{c}`: {what}"),
            (None, None) => write!(f, "{what}"),
        }
    }
}

impl Dataset {
    /// Assembles a dataset from rows. Column metadata defaults to numeric
    /// columns named `x1..xd` when `columns` is `None`.
    pub fn from_parts(
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        groups: Vec<usize>,
        num_groups: usize,
        mode: Mode,
        columns: Option<Vec<ColumnMeta>>,
    ) -> Self {
        let d = features.first().map_or(0, Vec::len);
        let columns = columns.unwrap_or_else(|| {
            (1..=d)
                .map(|j| ColumnMeta::numeric(format!("x{j}")))
                .collect()
        });
        Self {
            features,
            labels,
            groups,
            num_groups,
            mode,
            columns,
            allow_empty_groups: false,
        }
    }

    /// Same as [`Dataset::from_parts`] followed by [`Dataset::ensure_valid`].
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        groups: Vec<usize>,
        num_groups: usize,
        mode: Mode,
        columns: Option<Vec<ColumnMeta>>,
    ) -> Result<Self> {
        let ds = Self::from_parts(features, labels, groups, num_groups, mode, columns);
        ds.ensure_valid()?;
        Ok(ds)
    }

    /// Marks empty groups as acceptable (they are otherwise a violation).
    pub fn with_empty_groups_allowed(mut self, allowed: bool) -> Self {
        self.allow_empty_groups = allowed;
        self
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn group(&self, i: usize) -> usize {
        self.groups[i]
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Row indices of group `k` (1-based), ascending.
    pub fn group_rows(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.groups[i] == k).collect()
    }

    /// Row indices outside group `k`, ascending.
    pub fn out_group_rows(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.groups[i] != k).collect()
    }

    /// `n_k` for k = 1..=K.
    pub fn group_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_groups];
        for &g in &self.groups {
            if (1..=self.num_groups).contains(&g) {
                counts[g - 1] += 1;
            }
        }
        counts
    }

    /// New dataset restricted to `rows`, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            groups: rows.iter().map(|&i| self.groups[i]).collect(),
            num_groups: self.num_groups,
            mode: self.mode,
            columns: self.columns.clone(),
            allow_empty_groups: true,
        }
    }

    /// New dataset with feature column `j` removed.
    pub fn without_column(&self, j: usize) -> Self {
        let mut columns = self.columns.clone();
        columns.remove(j);
        Self {
            features: self
                .features
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r.remove(j);
                    r
                })
                .collect(),
            columns,
            ..self.clone()
        }
    }

    /// Replaces the group assignment.
    pub fn with_groups(&self, groups: Vec<usize>, num_groups: usize) -> Self {
        Self {
            groups,
            num_groups,
            ..self.clone()
        }
    }

    /// Replaces the labels.
    pub fn with_labels(&self, labels: Vec<f64>) -> Self {
        Self {
            labels,
            ..self.clone()
        }
    }

    /// Checks every invariant. An empty list means the dataset is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.labels.len();
        if self.features.len() != n || self.groups.len() != n {
            out.push(Violation {
                row: None,
                column: None,
                rule: Rule::RowCountMismatch,
            });
        }
        if self.num_groups == 0 {
            out.push(Violation {
                row: None,
                column: None,
                rule: Rule::NoGroups,
            });
        }
        let d = self.columns.len();
        if let Some(first) = self.features.first() {
            if first.len() != d {
                out.push(Violation {
                    row: None,
                    column: None,
                    rule: Rule::ColumnMetaMismatch,
                });
            }
        }
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != d {
                out.push(Violation {
                    row: Some(i),
                    column: None,
                    rule: Rule::RowWidthMismatch,
                });
                continue;
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    out.push(Violation {
                        row: Some(i),
                        column: Some(self.columns[j].name.clone()),
                        rule: Rule::NonFiniteFeature,
                    });
                }
            }
        }
        for (i, &y) in self.labels.iter().enumerate() {
            let bad = match self.mode {
                Mode::Binary => (y != 0.0 && y != 1.0).then_some(Rule::LabelNotBinary),
                Mode::Regression => (!(0.0..=1.0).contains(&y)).then_some(Rule::LabelOutOfRange),
            };
            if let Some(rule) = bad {
                out.push(Violation {
                    row: Some(i),
                    column: Some("label".into()),
                    rule,
                });
            }
        }
        for (i, &g) in self.groups.iter().enumerate() {
            if g == 0 || g > self.num_groups {
                out.push(Violation {
                    row: Some(i),
                    column: Some("group".into()),
                    rule: Rule::GroupOutOfRange,
                });
            }
        }
        if !self.allow_empty_groups {
            for (k, &c) in self.group_counts().iter().enumerate() {
                if c == 0 {
                    out.push(Violation {
                        row: None,
                        column: Some(format!("group {}", k + 1)),
                        rule: Rule::EmptyGroup,
                    });
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            return Ok(());
        }
        let shown: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
        let more = violations.len().saturating_sub(5);
        let mut msg = shown.join("; ");
        if more > 0 {
            msg.push_str(&format!("; and {more} more"));
        }
        Err(Error::InvalidDataset(msg))
    }

    /// Writes the dataset as CSV: one column per feature, then `label`, then
    /// `group` (1-based). Floats use the shortest representation that
    /// round-trips, so [`Dataset::read_csv`] restores every cell bit-exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        header.push("label");
        header.push("group");
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            record.clear();
            record.extend(self.features[i].iter().map(|v| format_float(*v)));
            record.push(format_float(self.labels[i]));
            record.push(self.groups[i].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`Dataset::write_csv`]. `K` is the largest
    /// group index present. Column kinds are restored as numeric.
    pub fn read_csv<R: Read>(reader: R, mode: Mode) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let width = header.len();
        if width < 2 || &header[width - 2] != "label" || &header[width - 1] != "group" {
            return Err(Error::InvalidDataset(
                "expected trailing `label` and `group` columns".into(),
            ));
        }
        let columns: Vec<ColumnMeta> = header
            .iter()
            .take(width - 2)
            .map(ColumnMeta::numeric)
            .collect();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let cell = |j: usize| -> Result<f64> {
                rec[j].trim().parse::<f64>().map_err(|e| Error::Cell {
                    row,
                    column: header[j].to_string(),
                    reason: e.to_string(),
                })
            };
            let mut x = Vec::with_capacity(width - 2);
            for j in 0..width - 2 {
                x.push(cell(j)?);
            }
            features.push(x);
            labels.push(cell(width - 2)?);
            let g = rec[width - 1]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Cell {
                    row,
                    column: "group".into(),
                    reason: e.to_string(),
                })?;
            groups.push(g);
        }
        let k = groups.iter().copied().max().unwrap_or(0);
        Ok(Self::from_parts(
            features,
            labels,
            groups,
            k,
            mode,
            Some(columns),
        ))
    }
}

pub(crate) fn format_float(v: f64) -> String {
    // `{:?}` is the shortest string that parses back to the same bits.
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        Dataset::from_parts(
            vec![
                vec![0.0, 1.0],
                vec![1.0, 0.5],
                vec![2.0, -1.0],
                vec![3.0, 0.0],
            ],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1, 1, 2, 2],
            2,
            Mode::Binary,
            None,
        )
    }

    #[test]
    fn well_formed_has_no_violations() {
        assert!(small().validate().is_empty());
    }

    #[test]
    fn fractional_binary_label_is_reported() {
        let ds = small();
        let mut labels = ds.labels().to_vec();
        labels[3] = 0.5;
        let v = ds.with_labels(labels).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].row, Some(3));
        assert_eq!(v[0].rule, Rule::LabelNotBinary);
    }

    #[test]
    fn group_beyond_k_is_reported() {
        let ds = small();
        let v = ds.with_groups(vec![1, 3, 2, 2], 2).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].row, Some(1));
        assert_eq!(v[0].rule, Rule::GroupOutOfRange);
    }

    #[test]
    fn empty_group_needs_flag() {
        let ds = small().with_groups(vec![1, 1, 1, 1], 2);
        assert_eq!(ds.validate()[0].rule, Rule::EmptyGroup);
        assert!(ds.with_empty_groups_allowed(true).validate().is_empty());
    }

    #[test]
    fn regression_labels_must_lie_in_unit_interval() {
        let ds = Dataset::from_parts(
            vec![vec![0.0], vec![1.0]],
            vec![0.25, 1.5],
            vec![1, 1],
            1,
            Mode::Regression,
            None,
        );
        let v = ds.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::LabelOutOfRange);
    }

    #[test]
    fn ragged_rows_are_reported() {
        let ds = Dataset::from_parts(
            vec![vec![0.0, 1.0], vec![1.0]],
            vec![0.0, 1.0],
            vec![1, 1],
            1,
            Mode::Binary,
            None,
        );
        assert!(ds
            .validate()
            .iter()
            .any(|v| v.rule == Rule::RowWidthMismatch));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = Dataset::from_parts(
            vec![vec![0.1, 1e-300], vec![-3.5e12, std::f64::consts::PI]],
            vec![0.3, 1.0 / 3.0],
            vec![2, 1],
            2,
            Mode::Regression,
            None,
        );
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice(), Mode::Regression).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn subset_and_drop_column() {
        let ds = small();
        let sub = ds.subset(&[2, 0]);
        assert_eq!(sub.row(0), &[2.0, -1.0]);
        assert_eq!(sub.groups(), &[2, 1]);
        let dropped = ds.without_column(0);
        assert_eq!(dropped.d(), 1);
        assert_eq!(dropped.row(1), &[0.5]);
        assert_eq!(dropped.columns()[0].name, "x2");
    }
}
