//! Predictors, trained candidates, and the per-group dispatcher.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::GroupStats;

/// `w·x + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, intercept: f64) -> Self {
        Self { weights, intercept }
    }

    /// Model whose output is feature `column` of a `d`-wide row.
    pub fn coordinate(d: usize, column: usize) -> Self {
        let mut weights = vec![0.0; d];
        weights[column] = 1.0;
        Self::new(weights, 0.0)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (w, v)| acc + w * v)
    }
}

/// A classifier or regressor mapping a feature row to a value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Predictor {
    Constant {
        value: f64,
    },
    /// Real-valued output `w·x + b`.
    Linear(LinearModel),
    /// 1 iff `score(x) > threshold`.
    Threshold {
        score: LinearModel,
        threshold: f64,
    },
    /// 1 iff `w·x + b ≥ 0`.
    Halfspace {
        weights: Vec<f64>,
        bias: f64,
    },
    /// Exact-match lookup on the whole row, `default` elsewhere.
    Table {
        entries: Vec<(Vec<f64>, f64)>,
        default: f64,
    },
}

impl Predictor {
    pub fn constant(value: f64) -> Self {
        Predictor::Constant { value }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Predictor::Constant { value } => *value,
            Predictor::Linear(m) => m.predict(x),
            Predictor::Threshold { score, threshold } => {
                if score.predict(x) > *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Predictor::Halfspace { weights, bias } => {
                let s = weights.iter().zip(x).fold(*bias, |acc, (w, v)| acc + w * v);
                if s >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Predictor::Table { entries, default } => entries
                .iter()
                .find(|(row, _)| row.as_slice() == x)
                .map_or(*default, |(_, z)| *z),
        }
    }

    /// Number of input columns the predictor reads, when it has one.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Predictor::Constant { .. } => None,
            Predictor::Linear(m) | Predictor::Threshold { score: m, .. } => Some(m.weights.len()),
            Predictor::Halfspace { weights, .. } => Some(weights.len()),
            Predictor::Table { entries, .. } => entries.first().map(|(r, _)| r.len()),
        }
    }
}

/// One classifier returned by a learner, with its positive count `P` on the
/// rows the learner was asked to count (the in-group rows of its sample).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateClassifier {
    pub predictor: Predictor,
    pub positives: usize,
    /// Weighted training error `Σ w_i |y_i − z_i| / W` over the whole sample.
    pub weighted_error: f64,
    /// Statistics over the counted rows, normalized by their own count.
    /// Candidate tables renormalize the profile by the dataset size.
    pub stats: GroupStats,
    pub theta: Option<f64>,
}

/// `γ(x) = c_{g(x)}(x)`: one predictor per group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoupledClassifier {
    pub per_group: Vec<Predictor>,
    pub achieved_loss: f64,
    pub loss_spec_id: String,
    pub input_dim: Option<usize>,
}

impl DecoupledClassifier {
    pub fn new(
        per_group: Vec<Predictor>,
        achieved_loss: f64,
        loss_spec_id: impl Into<String>,
    ) -> Self {
        let input_dim = per_group.iter().find_map(Predictor::input_dim);
        Self {
            per_group,
            achieved_loss,
            loss_spec_id: loss_spec_id.into(),
            input_dim,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.per_group.len()
    }
}

/// Applies the classifier of group `group` (1-based) to `x`.
pub fn predict_decoupled(dc: &DecoupledClassifier, x: &[f64], group: usize) -> Result<f64> {
    if group == 0 || group > dc.per_group.len() {
        return Err(Error::GroupOutOfRange {
            group,
            groups: dc.per_group.len(),
        });
    }
    if let Some(d) = dc.input_dim {
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
    }
    Ok(dc.per_group[group - 1].predict(x))
}
