//! Outer cross-validation over the four baselines.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ingest::ingest_csv;
use super::report::{Aggregate, DatasetInfo, FoldEntry, Report, RunStatus};
use super::select::{
    select_sensitive_attribute, stratified_folds, SelectionOptions, SensitiveSelection,
};
use super::select::{DEFAULT_MAX_PER_GROUP, DEFAULT_MIN_PER_GROUP};
use crate::dataset::{Dataset, Mode};
use crate::decouple::{decouple_with, general_decouple_with, DecoupleConfig, SearchConfig};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::learners::{
    Counted, Learner, LeastSquares, LeastSquaresThreshold, ThresholdStumps, WeightedSample,
};
use crate::losses::{
    group_stats_with, joint_loss, joint_loss_from_stats, ErrorMetric, GroupStats, Instance,
    LossSpec,
};
use crate::model::{predict_decoupled, DecoupledClassifier, Predictor};
use crate::transfer::{CrossValidatedTheta, TransferConfig};

/// Trivial-dataset cutoff on the blind baseline's mean held-out loss.
pub const TRIVIAL_LOSS: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// One model without the sensitive column.
    Blind,
    /// One model with the sensitive column.
    Coupled,
    /// One model per group, own rows only.
    Decoupled,
    /// One model per group, other groups' rows down-weighted by a CV-chosen θ.
    DecoupledTransfer,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [
        Baseline::Blind,
        Baseline::Coupled,
        Baseline::Decoupled,
        Baseline::DecoupledTransfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Blind => "blind",
            Baseline::Coupled => "coupled",
            Baseline::Decoupled => "decoupled",
            Baseline::DecoupledTransfer => "decoupled_transfer",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown baseline `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    /// Regression: weighted least squares.
    LeastSquares,
    /// Binary: least-squares score with a threshold sweep.
    LsqThreshold,
    /// Binary: single-feature thresholds over every column.
    Stumps,
}

impl LearnerKind {
    pub fn default_for(mode: Mode) -> Self {
        match mode {
            Mode::Regression => LearnerKind::LeastSquares,
            Mode::Binary => LearnerKind::LsqThreshold,
        }
    }

    fn build(self) -> Box<dyn Learner> {
        match self {
            LearnerKind::LeastSquares => Box::new(LeastSquares::default()),
            LearnerKind::LsqThreshold => Box::new(LeastSquaresThreshold::default()),
            LearnerKind::Stumps => Box::new(ThresholdStumps),
        }
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "least-squares" => Ok(LearnerKind::LeastSquares),
            "lsq-threshold" => Ok(LearnerKind::LsqThreshold),
            "stumps" => Ok(LearnerKind::Stumps),
            other => Err(Error::InvalidParameter(format!(
                "unknown learner `{other}` (expected least-squares, lsq-threshold or stumps)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub input_path: Option<PathBuf>,
    pub label_column: String,
    pub sensitive_column: Option<String>,
    pub mode: Mode,
    pub loss: LossSpec,
    pub learner: LearnerKind,
    pub outer_folds: usize,
    pub transfer: TransferConfig,
    pub seed: u64,
    pub baselines: Vec<Baseline>,
    pub min_per_group: usize,
    pub max_per_group: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl ExperimentConfig {
    /// Five outer folds, default transfer settings, all four baselines, and
    /// the balanced loss.
    pub fn new(label_column: impl Into<String>, mode: Mode) -> Self {
        Self {
            input_path: None,
            label_column: label_column.into(),
            sensitive_column: None,
            mode,
            loss: LossSpec::Balanced,
            learner: LearnerKind::default_for(mode),
            outer_folds: 5,
            transfer: TransferConfig::default(),
            seed: 0,
            baselines: Baseline::ALL.to_vec(),
            min_per_group: DEFAULT_MIN_PER_GROUP,
            max_per_group: DEFAULT_MAX_PER_GROUP,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer_folds < 2 {
            return Err(Error::InvalidParameter(
                "need at least 2 outer folds".into(),
            ));
        }
        if self.baselines.is_empty() {
            return Err(Error::InvalidParameter("no baselines selected".into()));
        }
        let mut sorted = self.baselines.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.baselines.len() {
            return Err(Error::InvalidParameter("baselines listed twice".into()));
        }
        self.loss.check(2)?;
        self.transfer.validate()?;
        match self.mode {
            Mode::Regression => {
                if !matches!(self.loss, LossSpec::Balanced | LossSpec::L1) {
                    return Err(Error::IncompatibleLoss(format!(
                        "`{}` is not available in regression mode (use balanced or l1)",
                        self.loss
                    )));
                }
                if self.learner != LearnerKind::LeastSquares {
                    return Err(Error::InvalidParameter(
                        "regression mode needs the least-squares learner".into(),
                    ));
                }
            }
            Mode::Binary => {
                if self.learner == LearnerKind::LeastSquares {
                    return Err(Error::InvalidParameter(
                        "binary mode needs a classifier learner (lsq-threshold or stumps)".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A trained model as applied at test time.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Single(Predictor),
    Decoupled(DecoupledClassifier),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldModels {
    pub fold: usize,
    pub models: Vec<(Baseline, TrainedModel)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub report: Report,
    /// Trained models of every non-degenerate fold. Not part of the report.
    pub models: Vec<FoldModels>,
}

/// Ingests `cfg.input_path`, selects the sensitive column and runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let path = cfg
        .input_path
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("no input path".into()))?;
    let ing = ingest_csv(path, &cfg.label_column, cfg.mode)?;
    run_on_dataset(&ing.dataset, ing.log, cfg)
}

/// Runs on an ingested dataset (groups are ignored and reassigned).
pub fn run_on_dataset(
    ds: &Dataset,
    log: Vec<String>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let sel = select_sensitive_attribute(ds, &selection_options(cfg))?;
    run_selected(&sel, log, cfg)
}

pub fn selection_options(cfg: &ExperimentConfig) -> SelectionOptions {
    SelectionOptions {
        column: cfg.sensitive_column.clone(),
        min_per_group: cfg.min_per_group,
        max_per_group: cfg.max_per_group,
        seed: cfg.seed,
    }
}

/// Outer fold of every row of the selected dataset.
pub fn outer_folds(sel: &SensitiveSelection, cfg: &ExperimentConfig) -> Vec<usize> {
    stratified_folds(sel.dataset.groups(), 2, cfg.outer_folds, cfg.seed)
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add((fold as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

struct FoldResult {
    entries: Vec<FoldEntry>,
    models: Vec<(Baseline, TrainedModel)>,
}

/// Runs every baseline on every outer fold of an already split dataset.
pub fn run_selected(
    sel: &SensitiveSelection,
    mut log: Vec<String>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let ds = &sel.dataset;
    let folds = outer_folds(sel, cfg);
    log.extend(sel.log.iter().cloned());

    let results = exec::map_range(cfg.exec, 0..cfg.outer_folds, |f| {
        run_fold(sel, &folds, f, cfg)
    });
    let mut entries = Vec::new();
    let mut models = Vec::new();
    let mut degenerate = Vec::new();
    for (f, r) in results.into_iter().enumerate() {
        match r? {
            Some(fr) => {
                entries.extend(fr.entries);
                models.push(FoldModels {
                    fold: f,
                    models: fr.models,
                });
            }
            None => degenerate.push(f),
        }
    }

    let mut baselines = cfg.baselines.clone();
    baselines.sort();
    let aggregates = aggregate(&entries, &baselines);
    let mut fit_counts = BTreeMap::new();
    for e in &entries {
        *fit_counts.entry(e.baseline).or_insert(0) += e.fits;
    }
    let trivial = aggregates
        .get(&Baseline::Blind)
        .and_then(|a| a.mean_loss)
        .is_some_and(|m| m < TRIVIAL_LOSS);
    let report = Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: if trivial {
            RunStatus::DiscardedTrivial
        } else {
            RunStatus::Ok
        },
        config: cfg.clone(),
        dataset: DatasetInfo {
            path: cfg.input_path.as_ref().map(|p| p.display().to_string()),
            rows: ds.n(),
            features: ds.d(),
            sensitive_column: sel.column_name.clone(),
            group_values: sel.values,
            group_sizes_before_truncation: sel.sizes_before_truncation,
            group_sizes: [ds.group_counts()[0], ds.group_counts()[1]],
            preprocessing_log: log,
        },
        folds: entries,
        aggregates,
        degenerate_folds: degenerate,
        fit_counts,
    };
    Ok(ExperimentOutcome { report, models })
}

/// Mean, sample standard deviation and log ratio against blind, computed
/// from the fold entries alone.
pub fn aggregate(entries: &[FoldEntry], baselines: &[Baseline]) -> BTreeMap<Baseline, Aggregate> {
    let mut out: BTreeMap<Baseline, Aggregate> = BTreeMap::new();
    for &b in baselines {
        let rows: Vec<&FoldEntry> = entries.iter().filter(|e| e.baseline == b).collect();
        let m = rows.len();
        let mean = (m > 0).then(|| rows.iter().map(|e| e.loss).sum::<f64>() / m as f64);
        let std = mean.filter(|_| m > 1).map(|mu| {
            (rows.iter().map(|e| (e.loss - mu).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
        });
        let k = rows.first().map_or(0, |e| e.group_losses.len());
        let mean_group_losses = (0..k)
            .map(|g| rows.iter().map(|e| e.group_losses[g]).sum::<f64>() / m as f64)
            .collect();
        out.insert(
            b,
            Aggregate {
                folds_used: m,
                mean_loss: mean,
                std_loss: std,
                log_ratio_vs_blind: None,
                mean_group_losses,
            },
        );
    }
    let blind = out.get(&Baseline::Blind).and_then(|a| a.mean_loss);
    for a in out.values_mut() {
        a.log_ratio_vs_blind = match (a.mean_loss, blind) {
            (Some(m), Some(b)) if m > 0.0 && b > 0.0 => Some((m / b).ln()),
            _ => None,
        };
    }
    out
}

fn run_fold(
    sel: &SensitiveSelection,
    folds: &[usize],
    f: usize,
    cfg: &ExperimentConfig,
) -> Result<Option<FoldResult>> {
    let ds = &sel.dataset;
    let j = sel.column;
    let train_rows: Vec<usize> = (0..ds.n()).filter(|&i| folds[i] != f).collect();
    let test_rows: Vec<usize> = (0..ds.n()).filter(|&i| folds[i] == f).collect();
    let train = ds.subset(&train_rows);
    let test = ds.subset(&test_rows);
    let min_train = if cfg.baselines.contains(&Baseline::DecoupledTransfer) {
        cfg.transfer.inner_folds
    } else {
        1
    };
    if train.group_counts().iter().any(|&c| c < min_train) || test.group_counts().contains(&0) {
        return Ok(None);
    }
    let train_blind = train.without_column(j);
    let test_blind = test.without_column(j);
    let search = DecoupleConfig {
        search: SearchConfig {
            exec: cfg.exec,
            ..SearchConfig::default()
        },
        check_monotonic: false,
    };

    let mut entries = Vec::new();
    let mut models = Vec::new();
    for &b in &cfg.baselines {
        let learner = Counted::new(cfg.learner.build());
        let (model, thetas) = match b {
            Baseline::Blind => (
                TrainedModel::Single(fit_single(&learner, &train_blind, &cfg.loss)?),
                None,
            ),
            Baseline::Coupled => (
                TrainedModel::Single(fit_single(&learner, &train, &cfg.loss)?),
                None,
            ),
            Baseline::Decoupled => {
                let out = decouple_with(&learner, &cfg.loss, &train_blind, &search)?;
                (TrainedModel::Decoupled(out.classifier), Some(vec![0.0; 2]))
            }
            Baseline::DecoupledTransfer => {
                let t = CrossValidatedTheta {
                    base: &learner,
                    config: cfg.transfer.clone(),
                    seed: fold_seed(cfg.seed, f),
                    exec: cfg.exec,
                };
                let out = general_decouple_with(&t, &cfg.loss, &train_blind, &search)?;
                let thetas = out
                    .selection
                    .indices
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| out.table.group(k + 1)[i].candidate.theta.unwrap_or(0.0))
                    .collect();
                (TrainedModel::Decoupled(out.classifier), Some(thetas))
            }
        };
        let eval_ds = if b == Baseline::Coupled {
            &test
        } else {
            &test_blind
        };
        let (loss, group_losses) = evaluate(&model, eval_ds, &cfg.loss)?;
        entries.push(FoldEntry {
            fold: f,
            baseline: b,
            loss,
            group_losses,
            theta_by_group: thetas,
            fits: learner.calls(),
        });
        models.push((b, model));
    }
    Ok(Some(FoldResult { entries, models }))
}

fn metric(mode: Mode) -> ErrorMetric {
    match mode {
        Mode::Binary => ErrorMetric::Absolute,
        Mode::Regression => ErrorMetric::Squared,
    }
}

fn loss_of(preds: Vec<f64>, ds: &Dataset, spec: &LossSpec) -> Result<(f64, Vec<f64>)> {
    let inst = Instance::new(
        ds.num_groups(),
        ds.groups().to_vec(),
        ds.labels().to_vec(),
        preds,
    )?;
    let stats: Vec<GroupStats> = group_stats_with(&inst, metric(ds.mode()))?
        .into_iter()
        .enumerate()
        .map(|(k, s)| s.ok_or(Error::EmptyGroup { group: k + 1 }))
        .collect::<Result<_>>()?;
    let loss = match ds.mode() {
        Mode::Binary => joint_loss(spec, &inst)?,
        Mode::Regression => joint_loss_from_stats(spec, &stats, ds.n())?,
    };
    Ok((loss, stats.iter().map(|s| s.ell).collect()))
}

/// One model on all rows. Among a binary learner's candidates, the one with
/// least joint loss on the training rows, ties to the first.
fn fit_single<L: Learner>(learner: &L, train: &Dataset, spec: &LossSpec) -> Result<Predictor> {
    let all: Vec<usize> = (0..train.n()).collect();
    let cands = learner.learn(train, &WeightedSample::uniform(&all))?;
    if cands.len() == 1 || *spec == LossSpec::L1 {
        // L1 is the overall error rate, which the learner already reports.
        let best = cands
            .iter()
            .enumerate()
            .min_by(|a, b| {
                a.1.weighted_error
                    .total_cmp(&b.1.weighted_error)
                    .then(a.0.cmp(&b.0))
            })
            .ok_or_else(|| Error::ContractViolation {
                group: 1,
                detail: "learner returned no candidates".into(),
            })?;
        return Ok(best.1.predictor.clone());
    }
    let mut best: Option<(f64, &Predictor)> = None;
    for c in &cands {
        let preds = train
            .rows()
            .iter()
            .map(|x| c.predictor.predict(x))
            .collect();
        let (l, _) = loss_of(preds, train, spec)?;
        if best.is_none_or(|(b, _)| l < b) {
            best = Some((l, &c.predictor));
        }
    }
    Ok(best.expect("nonempty candidates").1.clone())
}

fn evaluate(model: &TrainedModel, test: &Dataset, spec: &LossSpec) -> Result<(f64, Vec<f64>)> {
    let preds = match model {
        TrainedModel::Single(p) => test.rows().iter().map(|x| p.predict(x)).collect(),
        TrainedModel::Decoupled(dc) => (0..test.n())
            .map(|i| predict_decoupled(dc, test.row(i), test.group(i)))
            .collect::<Result<Vec<f64>>>()?,
    };
    loss_of(preds, test, spec)
}
