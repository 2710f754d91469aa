//! Exhaustive empirical risk minimization over an explicit finite class.

use serde::{Deserialize, Serialize};

use super::{candidate_from_predictions, WeightedSample};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::model::{CandidateClassifier, Predictor};

/// Default cap on `|C| · m` classifier evaluations.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// A nonempty list of classifiers. A classifier's identifier is its index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteClass {
    classifiers: Vec<Predictor>,
}

impl FiniteClass {
    pub fn new(classifiers: Vec<Predictor>) -> Result<Self> {
        if classifiers.is_empty() {
            return Err(Error::InvalidParameter("finite class is empty".into()));
        }
        Ok(Self { classifiers })
    }

    pub fn len(&self) -> usize {
        self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, id: usize) -> Option<&Predictor> {
        self.classifiers.get(id)
    }

    pub fn classifiers(&self) -> &[Predictor] {
        &self.classifiers
    }

    /// Both constant classifiers.
    pub fn constants() -> Self {
        Self {
            classifiers: vec![Predictor::constant(0.0), Predictor::constant(1.0)],
        }
    }
}

/// For every positive count some classifier reaches on the in-group rows,
/// the classifier of least weighted error, ties to the lowest identifier.
/// Classifier outputs must be 0 or 1.
pub fn exhaustive_learn(
    class: &FiniteClass,
    ds: &Dataset,
    sample: &WeightedSample,
    budget: u64,
    exec: Exec,
) -> Result<Vec<CandidateClassifier>> {
    sample.check(ds)?;
    let required = (class.len() as u64).saturating_mul(sample.len() as u64);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let total = sample.total_weight();
    let scored = exec::map_slice(exec, &class.classifiers, |c| {
        let mut positives = 0;
        let mut err = 0.0;
        for e in &sample.entries {
            let z = c.predict(ds.row(e.row));
            if z != 0.0 && z != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "classifier output {z} is not binary"
                )));
            }
            positives += usize::from(e.in_group && z == 1.0);
            err += e.weight * (ds.label(e.row) - z).abs();
        }
        Ok((positives, err / total))
    });
    let mut best: Vec<Option<(usize, f64)>> = vec![None; sample.in_group_len() + 1];
    for (id, r) in scored.into_iter().enumerate() {
        let (p, err) = r?;
        if best[p].is_none_or(|(_, e)| err < e) {
            best[p] = Some((id, err));
        }
    }
    best.into_iter()
        .flatten()
        .map(|(id, _)| {
            let c = &class.classifiers[id];
            let preds: Vec<f64> = sample
                .entries
                .iter()
                .map(|e| c.predict(ds.row(e.row)))
                .collect();
            candidate_from_predictions(ds, sample, c.clone(), &preds)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Mode;

    fn ds(labels: Vec<f64>) -> Dataset {
        let n = labels.len();
        Dataset::new(
            (0..n).map(|i| vec![i as f64]).collect(),
            labels,
            vec![1; n],
            1,
            Mode::Binary,
            None,
        )
        .unwrap()
    }

    #[test]
    fn constants_on_three_labels() {
        let d = ds(vec![1.0, 1.0, 0.0]);
        let c = exhaustive_learn(
            &FiniteClass::constants(),
            &d,
            &WeightedSample::uniform(&[0, 1, 2]),
            DEFAULT_BUDGET,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].positives, c[0].weighted_error), (0, 2.0 / 3.0));
        assert_eq!((c[1].positives, c[1].weighted_error), (3, 1.0 / 3.0));
    }

    #[test]
    fn true_labeling_has_zero_error() {
        let d = ds(vec![1.0, 0.0, 1.0]);
        let truth = Predictor::Table {
            entries: vec![(vec![0.0], 1.0), (vec![2.0], 1.0)],
            default: 0.0,
        };
        let class = FiniteClass::new(vec![Predictor::constant(1.0), truth.clone()]).unwrap();
        let c = exhaustive_learn(
            &class,
            &d,
            &WeightedSample::uniform(&[0, 1, 2]),
            DEFAULT_BUDGET,
            Exec::Sequential,
        )
        .unwrap();
        let at2 = c.iter().find(|c| c.positives == 2).unwrap();
        assert_eq!(at2.weighted_error, 0.0);
        assert_eq!(at2.predictor, truth);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let d = ds(vec![1.0, 0.0]);
        let a = Predictor::Table {
            entries: vec![(vec![0.0], 1.0), (vec![1.0], 1.0)],
            default: 0.0,
        };
        let class = FiniteClass::new(vec![a.clone(), Predictor::constant(1.0)]).unwrap();
        for exec in [Exec::Sequential, Exec::Parallel] {
            let c = exhaustive_learn(
                &class,
                &d,
                &WeightedSample::uniform(&[0, 1]),
                DEFAULT_BUDGET,
                exec,
            )
            .unwrap();
            assert_eq!(c.len(), 1);
            assert_eq!(c[0].predictor, a);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let d = ds(vec![1.0, 0.0, 1.0]);
        let err = exhaustive_learn(
            &FiniteClass::constants(),
            &d,
            &WeightedSample::uniform(&[0, 1, 2]),
            5,
            Exec::Sequential,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::BudgetExceeded {
                required: 6,
                budget: 5
            }
        ));
    }
}
