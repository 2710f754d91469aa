//! Report structures and their files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{Baseline, ExperimentConfig};
use crate::dataset::format_float;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// The blind baseline's mean held-out loss is below 0.001.
    DiscardedTrivial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: Option<String>,
    pub rows: usize,
    pub features: usize,
    pub sensitive_column: String,
    /// Column value of group 1 and of group 2.
    pub group_values: [f64; 2],
    pub group_sizes_before_truncation: [usize; 2],
    pub group_sizes: [usize; 2],
    pub preprocessing_log: Vec<String>,
}

/// One baseline on one outer fold. Folds are numbered from 0; groups are
/// listed in order 1, 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldEntry {
    pub fold: usize,
    pub baseline: Baseline,
    /// Joint loss on the held-out rows.
    pub loss: f64,
    /// `ℓ_k` on the held-out rows.
    pub group_losses: Vec<f64>,
    /// θ per group; absent for single-model baselines.
    pub theta_by_group: Option<Vec<f64>>,
    /// Base-learner calls.
    pub fits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub folds_used: usize,
    pub mean_loss: Option<f64>,
    /// Sample standard deviation over folds.
    pub std_loss: Option<f64>,
    /// `ln(mean_loss / blind mean_loss)`.
    pub log_ratio_vs_blind: Option<f64>,
    pub mean_group_losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub status: RunStatus,
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    pub folds: Vec<FoldEntry>,
    pub aggregates: BTreeMap<Baseline, Aggregate>,
    pub degenerate_folds: Vec<usize>,
    pub fit_counts: BTreeMap<Baseline, u64>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per baseline.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "baseline",
            "folds_used",
            "mean_loss",
            "std_loss",
            "log_ratio_vs_blind",
        ])?;
        let cell = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        for (b, a) in &self.aggregates {
            w.write_record([
                b.name().to_string(),
                a.folds_used.to_string(),
                cell(a.mean_loss),
                cell(a.std_loss),
                cell(a.log_ratio_vs_blind),
            ])?;
        }
        Ok(
            String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
                .expect("csv output is utf-8"),
        )
    }
}

/// Writes `report.json` and `summary.csv` into `dir`, creating it if needed.
pub fn emit_report(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    fs::write(dir.join("summary.csv"), report.summary_csv()?)?;
    Ok(())
}
