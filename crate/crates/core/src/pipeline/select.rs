//! Sensitive-attribute choice, group truncation and fold assignment.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{format_float, ColumnKind, Dataset};
use crate::error::{Error, Result};

pub const DEFAULT_MIN_PER_GROUP: usize = 100;
pub const DEFAULT_MAX_PER_GROUP: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionOptions {
    /// Column to use. When absent, the first qualifying binary column.
    pub column: Option<String>,
    pub min_per_group: usize,
    pub max_per_group: usize,
    pub seed: u64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            column: None,
            min_per_group: DEFAULT_MIN_PER_GROUP,
            max_per_group: DEFAULT_MAX_PER_GROUP,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitiveSelection {
    /// Two groups from the chosen column, each group truncated.
    pub dataset: Dataset,
    pub column: usize,
    pub column_name: String,
    /// Column value of group 1 and of group 2.
    pub values: [f64; 2],
    pub sizes_before_truncation: [usize; 2],
    pub log: Vec<String>,
}

fn two_values(ds: &Dataset, j: usize) -> Option<([f64; 2], [usize; 2])> {
    let mut vals: Vec<f64> = Vec::with_capacity(2);
    for r in ds.rows() {
        if !vals.contains(&r[j]) {
            if vals.len() == 2 {
                return None;
            }
            vals.push(r[j]);
        }
    }
    if vals.len() != 2 {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let lo_count = ds.rows().iter().filter(|r| r[j] == vals[0]).count();
    Some(([vals[0], vals[1]], [lo_count, ds.n() - lo_count]))
}

/// Splits rows on a two-valued column, the smaller value being group 1, and
/// caps each group at `max_per_group` rows by a seeded uniform subsample
/// that keeps the original row order.
///
/// Without an explicit column, picks the first column of kind binary (so not
/// a collapsed categorical) with at least `min_per_group` rows on each side,
/// and fails with [`Error::Discarded`] if none qualifies. An explicit column
/// only has to take exactly two values.
pub fn select_sensitive_attribute(
    ds: &Dataset,
    opts: &SelectionOptions,
) -> Result<SensitiveSelection> {
    if opts.max_per_group == 0 {
        return Err(Error::InvalidParameter(
            "max rows per group must be positive".into(),
        ));
    }
    let mut log = Vec::new();
    let (j, values, counts) = match &opts.column {
        Some(name) => {
            let j = ds.column_index(name).ok_or_else(|| {
                Error::InvalidParameter(format!("sensitive column `{name}` not found"))
            })?;
            let (values, counts) = two_values(ds, j).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "sensitive column `{name}` does not take exactly two values"
                ))
            })?;
            (j, values, counts)
        }
        None => {
            let found = (0..ds.d())
                .filter(|&j| ds.columns()[j].kind == ColumnKind::Binary)
                .find_map(|j| {
                    two_values(ds, j)
                        .filter(|(_, c)| c[0] >= opts.min_per_group && c[1] >= opts.min_per_group)
                        .map(|(v, c)| (j, v, c))
                });
            found.ok_or_else(|| {
                Error::Discarded(format!(
                    "no binary column has at least {} rows on each side",
                    opts.min_per_group
                ))
            })?
        }
    };
    let name = ds.columns()[j].name.clone();
    log.push(format!(
        "sensitive column `{name}`: value {} -> group 1 ({} rows), value {} -> group 2 ({} rows)",
        format_float(values[0]),
        counts[0],
        format_float(values[1]),
        counts[1]
    ));

    let groups: Vec<usize> = ds
        .rows()
        .iter()
        .map(|r| if r[j] == values[0] { 1 } else { 2 })
        .collect();
    let mut keep = Vec::with_capacity(ds.n());
    for (k, &count) in counts.iter().enumerate() {
        let rows: Vec<usize> = (0..ds.n()).filter(|&i| groups[i] == k + 1).collect();
        if count > opts.max_per_group {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64 + 1);
            let mut picked = index::sample(&mut rng, count, opts.max_per_group).into_vec();
            picked.sort_unstable();
            keep.extend(picked.into_iter().map(|p| rows[p]));
            log.push(format!(
                "group {}: truncated from {count} to {} rows",
                k + 1,
                opts.max_per_group
            ));
        } else {
            keep.extend(rows);
        }
    }
    keep.sort_unstable();
    let dataset = ds
        .with_groups(groups, 2)
        .subset(&keep)
        .with_empty_groups_allowed(false);
    dataset.ensure_valid()?;
    Ok(SensitiveSelection {
        dataset,
        column: j,
        column_name: name,
        values,
        sizes_before_truncation: counts,
        log,
    })
}

/// Outer-fold index per row. Each group's rows are shuffled with a seeded
/// generator and cut into `folds` contiguous blocks, so every fold holds
/// every group whenever the group has at least `folds` rows.
pub fn stratified_folds(
    groups: &[usize],
    num_groups: usize,
    folds: usize,
    seed: u64,
) -> Vec<usize> {
    let mut out = vec![0; groups.len()];
    for k in 1..=num_groups {
        let mut rows: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == k).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        rows.shuffle(&mut rng);
        let n = rows.len();
        for f in 0..folds {
            for &i in &rows[f * n / folds..(f + 1) * n / folds] {
                out[i] = f;
            }
        }
    }
    out
}
