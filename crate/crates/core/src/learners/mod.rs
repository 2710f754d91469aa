//! Base learners.
//!
//! Every binary learner here follows the same contract: for each achievable
//! number `P` of positive classifications on the in-group rows of its sample,
//! it returns at most one classifier, and that classifier has the least
//! weighted error among the classifiers it considers with exactly `P`
//! positives.

mod exhaustive;
mod lsq;
mod separators;
mod threshold;

use std::sync::atomic::{AtomicU64, Ordering};

use crate::dataset::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::losses::{group_stats_with, ErrorMetric, GroupStats, Instance};
use crate::model::{CandidateClassifier, LinearModel, Predictor};

pub use exhaustive::{exhaustive_learn, FiniteClass, DEFAULT_BUDGET};
pub use lsq::{fit_weighted_least_squares, LsqFit, LsqOptions, LsqProvenance};
pub use separators::{
    enumerate_linear_separators_2d, enumerate_linear_separators_2d_capped, MAX_SEPARATOR_POINTS,
};
pub use threshold::{sweep_thresholds, sweep_weighted, ThresholdCut, ThresholdSweep, WeightedCut};

/// One row of a weighted sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleEntry {
    pub row: usize,
    pub weight: f64,
    /// In-group rows are the ones positives and candidate stats are counted on.
    pub in_group: bool,
}

/// Rows of a dataset with nonnegative weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightedSample {
    pub entries: Vec<SampleEntry>,
}

impl WeightedSample {
    /// Every row at weight 1, all in-group.
    pub fn uniform(rows: &[usize]) -> Self {
        Self {
            entries: rows
                .iter()
                .map(|&row| SampleEntry {
                    row,
                    weight: 1.0,
                    in_group: true,
                })
                .collect(),
        }
    }

    /// In-group rows at weight 1 and out-group rows at weight `theta`, merged
    /// in ascending row order. `theta = 0` leaves the out-group rows out, so
    /// the sample equals `uniform(in_rows)`; `theta = 1` has the same entries,
    /// in the same order, as `uniform` over the union.
    pub fn transfer(in_rows: &[usize], out_rows: &[usize], theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "theta {theta} outside [0,1]"
            )));
        }
        let mut entries: Vec<SampleEntry> = in_rows
            .iter()
            .map(|&row| SampleEntry {
                row,
                weight: 1.0,
                in_group: true,
            })
            .collect();
        if theta > 0.0 {
            entries.extend(out_rows.iter().map(|&row| SampleEntry {
                row,
                weight: theta,
                in_group: false,
            }));
        }
        entries.sort_by_key(|e| e.row);
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn in_group_len(&self) -> usize {
        self.entries.iter().filter(|e| e.in_group).count()
    }

    pub fn check(&self, ds: &Dataset) -> Result<()> {
        for e in &self.entries {
            if e.row >= ds.n() {
                return Err(Error::InvalidParameter(format!(
                    "sample row {} beyond dataset of {} rows",
                    e.row,
                    ds.n()
                )));
            }
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "weight {} on row {}",
                    e.weight, e.row
                )));
            }
        }
        if self.total_weight() <= 0.0 {
            return Err(Error::ZeroWeight);
        }
        Ok(())
    }
}

/// A learner that turns a weighted sample into candidate classifiers.
pub trait Learner: Send + Sync {
    fn learn(&self, ds: &Dataset, sample: &WeightedSample) -> Result<Vec<CandidateClassifier>>;
}

impl<L: Learner + ?Sized> Learner for &L {
    fn learn(&self, ds: &Dataset, sample: &WeightedSample) -> Result<Vec<CandidateClassifier>> {
        (**self).learn(ds, sample)
    }
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn learn(&self, ds: &Dataset, sample: &WeightedSample) -> Result<Vec<CandidateClassifier>> {
        (**self).learn(ds, sample)
    }
}

fn metric_for(mode: Mode) -> ErrorMetric {
    match mode {
        Mode::Binary => ErrorMetric::Absolute,
        Mode::Regression => ErrorMetric::Squared,
    }
}

/// Builds a candidate from its outputs `preds` on the sample entries.
/// Positives and stats count in-group entries only; `p_hat` in the stats is
/// normalized by the in-group count.
pub fn candidate_from_predictions(
    ds: &Dataset,
    sample: &WeightedSample,
    predictor: Predictor,
    preds: &[f64],
) -> Result<CandidateClassifier> {
    debug_assert_eq!(preds.len(), sample.len());
    let metric = metric_for(ds.mode());
    let mut labels = Vec::new();
    let mut outs = Vec::new();
    let mut positives = 0;
    let (mut err, mut total) = (0.0, 0.0);
    for (e, &z) in sample.entries.iter().zip(preds) {
        let y = ds.label(e.row);
        let r = y - z;
        err += e.weight
            * match metric {
                ErrorMetric::Absolute => r.abs(),
                ErrorMetric::Squared => r * r,
            };
        total += e.weight;
        if e.in_group {
            labels.push(y);
            outs.push(z);
            positives += usize::from(z == 1.0);
        }
    }
    if labels.is_empty() {
        return Err(Error::InvalidParameter(
            "sample has no in-group rows".into(),
        ));
    }
    let stats = in_group_stats(labels, outs, metric)?;
    Ok(CandidateClassifier {
        predictor,
        positives,
        weighted_error: err / total,
        stats,
        theta: None,
    })
}

fn in_group_stats(labels: Vec<f64>, outs: Vec<f64>, metric: ErrorMetric) -> Result<GroupStats> {
    let n = labels.len();
    let inst = Instance::new(1, vec![1; n], labels, outs)?;
    Ok(group_stats_with(&inst, metric)?
        .pop()
        .flatten()
        .expect("nonempty group has stats"))
}

/// Least-squares regression; one real-valued candidate.
#[derive(Clone, Debug, Default)]
pub struct LeastSquares {
    pub options: LsqOptions,
}

impl Learner for LeastSquares {
    fn learn(&self, ds: &Dataset, sample: &WeightedSample) -> Result<Vec<CandidateClassifier>> {
        let fit = fit_weighted_least_squares(ds, sample, &self.options)?;
        let preds: Vec<f64> = sample
            .entries
            .iter()
            .map(|e| fit.model.predict(ds.row(e.row)))
            .collect();
        let mut c = candidate_from_predictions(ds, sample, Predictor::Linear(fit.model), &preds)?;
        c.positives = 0;
        Ok(vec![c])
    }
}

fn threshold_candidates(
    ds: &Dataset,
    sample: &WeightedSample,
    score: &LinearModel,
) -> Result<Vec<CandidateClassifier>> {
    let scores: Vec<f64> = sample
        .entries
        .iter()
        .map(|e| score.predict(ds.row(e.row)))
        .collect();
    let labels: Vec<f64> = sample.entries.iter().map(|e| ds.label(e.row)).collect();
    let weights: Vec<f64> = sample.entries.iter().map(|e| e.weight).collect();
    let counted: Vec<bool> = sample.entries.iter().map(|e| e.in_group).collect();
    sweep_weighted(&scores, &labels, &weights, &counted)?
        .into_iter()
        .map(|cut| {
            let predictor = cut.predictor(score);
            let preds: Vec<f64> = scores
                .iter()
                .map(|&s| f64::from(u8::from(s > cut.threshold)))
                .collect();
            candidate_from_predictions(ds, sample, predictor, &preds)
        })
        .collect()
}

/// Fits a least-squares score, then sweeps thresholds on it: one candidate
/// per achievable in-group positive count.
#[derive(Clone, Debug, Default)]
pub struct LeastSquaresThreshold {
    pub options: LsqOptions,
}

impl Learner for LeastSquaresThreshold {
    fn learn(&self, ds: &Dataset, sample: &WeightedSample) -> Result<Vec<CandidateClassifier>> {
        let fit = fit_weighted_least_squares(ds, sample, &self.options)?;
        threshold_candidates(ds, sample, &fit.model)
    }
}

/// Thresholds on a single feature column.
#[derive(Clone, Debug)]
pub struct FeatureThreshold {
    pub column: usize,
}

impl Learner for FeatureThreshold {
    fn learn(&self, ds: &Dataset, sample: &WeightedSample) -> Result<Vec<CandidateClassifier>> {
        sample.check(ds)?;
        if self.column >= ds.d() {
            return Err(Error::DimensionMismatch {
                expected: self.column + 1,
                got: ds.d(),
            });
        }
        threshold_candidates(ds, sample, &LinearModel::coordinate(ds.d(), self.column))
    }
}

/// Single-feature thresholds in both orientations over every column. For
/// each positive count, the stump of least weighted error, ties to the lower
/// column and then the ascending orientation.
#[derive(Clone, Debug, Default)]
pub struct ThresholdStumps;

impl Learner for ThresholdStumps {
    fn learn(&self, ds: &Dataset, sample: &WeightedSample) -> Result<Vec<CandidateClassifier>> {
        sample.check(ds)?;
        let d = ds.d();
        let mut best: Vec<Option<CandidateClassifier>> = vec![None; sample.in_group_len() + 1];
        for j in 0..d {
            for sign in [1.0, -1.0] {
                let mut w = vec![0.0; d];
                w[j] = sign;
                for c in threshold_candidates(ds, sample, &LinearModel::new(w, 0.0))? {
                    let p = c.positives;
                    if best[p]
                        .as_ref()
                        .is_none_or(|b| c.weighted_error < b.weighted_error)
                    {
                        best[p] = Some(c);
                    }
                }
            }
        }
        if d == 0 {
            for v in [0.0, 1.0] {
                let preds = vec![v; sample.len()];
                let c = candidate_from_predictions(ds, sample, Predictor::constant(v), &preds)?;
                let p = c.positives;
                best[p] = Some(c);
            }
        }
        Ok(best.into_iter().flatten().collect())
    }
}

/// Exhaustive empirical risk minimization over a finite class.
#[derive(Clone, Debug)]
pub struct Exhaustive {
    pub class: FiniteClass,
    pub budget: u64,
    pub exec: Exec,
}

impl Exhaustive {
    pub fn new(class: FiniteClass) -> Self {
        Self {
            class,
            budget: DEFAULT_BUDGET,
            exec: Exec::default(),
        }
    }
}

impl Learner for Exhaustive {
    fn learn(&self, ds: &Dataset, sample: &WeightedSample) -> Result<Vec<CandidateClassifier>> {
        exhaustive_learn(&self.class, ds, sample, self.budget, self.exec)
    }
}

/// Wraps a learner and counts how many times it is called.
#[derive(Debug, Default)]
pub struct Counted<L> {
    pub inner: L,
    calls: AtomicU64,
}

impl<L> Counted<L> {
    pub fn new(inner: L) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<L: Learner> Learner for Counted<L> {
    fn learn(&self, ds: &Dataset, sample: &WeightedSample) -> Result<Vec<CandidateClassifier>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.learn(ds, sample)
    }
}
