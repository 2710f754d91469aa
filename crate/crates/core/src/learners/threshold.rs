//! Score-threshold sweeps. A cut labels a row positive iff `score > t`.

use crate::error::{Error, Result};
use crate::model::{LinearModel, Predictor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdCut {
    pub threshold: f64,
    pub positives: usize,
    pub errors: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSweep {
    /// One cut per achievable positive count, in increasing `positives`.
    pub cuts: Vec<ThresholdCut>,
    /// Positive counts in `0..=m` that ties make unreachable.
    pub omitted: Vec<usize>,
}

/// Threshold strictly between `hi > lo`, preferring the midpoint. When the
/// midpoint rounds onto `hi`, `lo` itself separates them under `>`.
fn cut_between(hi: f64, lo: f64) -> f64 {
    let mid = hi / 2.0 + lo / 2.0;
    if mid < hi && mid >= lo {
        mid
    } else {
        lo
    }
}

/// Row indices sorted by descending score, ties by index.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn check_inputs(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::InvalidParameter(
            "threshold sweep needs at least one score".into(),
        ));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite score {s}")));
    }
    if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidParameter(format!("label {y} not in {{0,1}}")));
    }
    Ok(())
}

/// All threshold classifiers on `scores`, one per achievable positive count,
/// with unweighted error counts against `labels`.
pub fn sweep_thresholds(scores: &[f64], labels: &[f64]) -> Result<ThresholdSweep> {
    check_inputs(scores, labels)?;
    let m = scores.len();
    let order = descending(scores);
    let total_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let cut = |t: f64, positives: usize, fp: usize| {
        let tp = positives - fp;
        let fn_ = total_pos - tp;
        ThresholdCut {
            threshold: t,
            positives,
            errors: fp + fn_,
            false_positives: fp,
            false_negatives: fn_,
        }
    };
    let mut cuts = vec![cut(f64::INFINITY, 0, 0)];
    let mut fp = 0;
    for (rank, &i) in order.iter().enumerate() {
        fp += usize::from(labels[i] == 0.0);
        let positives = rank + 1;
        if positives == m {
            cuts.push(cut(f64::NEG_INFINITY, m, fp));
        } else {
            let next = scores[order[rank + 1]];
            if next < scores[i] {
                cuts.push(cut(cut_between(scores[i], next), positives, fp));
            }
        }
    }
    let mut reached = vec![false; m + 1];
    cuts.iter().for_each(|c| reached[c.positives] = true);
    let omitted = (0..=m).filter(|&p| !reached[p]).collect();
    Ok(ThresholdSweep { cuts, omitted })
}

/// A cut from a weighted sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedCut {
    pub threshold: f64,
    /// Positives among the counted rows.
    pub positives: usize,
    /// `Σ w_i |y_i − z_i| / Σ w_i` over all rows.
    pub weighted_error: f64,
}

impl WeightedCut {
    /// The classifier `score(x) > threshold`; infinite thresholds become
    /// constants.
    pub fn predictor(&self, score: &LinearModel) -> Predictor {
        if self.threshold == f64::INFINITY {
            Predictor::constant(0.0)
        } else if self.threshold == f64::NEG_INFINITY {
            Predictor::constant(1.0)
        } else {
            Predictor::Threshold {
                score: score.clone(),
                threshold: self.threshold,
            }
        }
    }
}

/// Weighted sweep. Positives count only rows with `counted[i]`; for each
/// positive count the cut of least weighted error is kept, and among equal
/// errors the one met first in descending score order (the higher threshold).
pub fn sweep_weighted(
    scores: &[f64],
    labels: &[f64],
    weights: &[f64],
    counted: &[bool],
) -> Result<Vec<WeightedCut>> {
    check_inputs(scores, labels)?;
    if weights.len() != scores.len() || counted.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: weights.len().min(counted.len()),
        });
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeight);
    }
    let m = scores.len();
    let order = descending(scores);
    let pos_weight: f64 = (0..m)
        .filter(|&i| labels[i] == 1.0)
        .map(|i| weights[i])
        .sum();
    let counted_total = counted.iter().filter(|&&c| c).count();
    let mut best: Vec<Option<WeightedCut>> = vec![None; counted_total + 1];
    let mut offer = |cut: WeightedCut| {
        let slot = &mut best[cut.positives];
        if slot.is_none_or(|b| cut.weighted_error < b.weighted_error) {
            *slot = Some(cut);
        }
    };
    // Error of "everything negative" is the positive weight; each row moved
    // to the positive side adds w if y = 0 and removes w if y = 1.
    let mut err = pos_weight;
    let mut positives = 0;
    offer(WeightedCut {
        threshold: f64::INFINITY,
        positives: 0,
        weighted_error: err / total,
    });
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] == 1.0 {
            err -= weights[i];
        } else {
            err += weights[i];
        }
        positives += usize::from(counted[i]);
        let threshold = if rank + 1 == m {
            f64::NEG_INFINITY
        } else {
            let next = scores[order[rank + 1]];
            if next == scores[i] {
                continue;
            }
            cut_between(scores[i], next)
        };
        offer(WeightedCut {
            threshold,
            positives,
            weighted_error: err.max(0.0) / total,
        });
    }
    Ok(best.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(scores: &[f64], labels: &[f64], t: f64) -> (usize, usize) {
        let z: Vec<bool> = scores.iter().map(|&s| s > t).collect();
        let p = z.iter().filter(|&&v| v).count();
        let e = z
            .iter()
            .zip(labels)
            .filter(|(&z, &y)| z != (y == 1.0))
            .count();
        (p, e)
    }

    #[test]
    fn three_scores() {
        let s = sweep_thresholds(&[0.1, 0.2, 0.9], &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.cuts.len(), 4);
        assert!(s.omitted.is_empty());
        let p1 = s.cuts.iter().find(|c| c.positives == 1).unwrap();
        assert_eq!(p1.errors, 0);
        assert!(p1.threshold > 0.2 && p1.threshold < 0.9);
        for c in &s.cuts {
            assert_eq!(
                brute(&[0.1, 0.2, 0.9], &[0.0, 0.0, 1.0], c.threshold),
                (c.positives, c.errors)
            );
        }
    }

    #[test]
    fn all_negative_labels() {
        let s = sweep_thresholds(&[0.3, 0.1, 0.7, 0.5], &[0.0; 4]).unwrap();
        assert_eq!(s.cuts.first().unwrap().errors, 0);
        assert_eq!(s.cuts.last().unwrap().errors, 4);
        assert_eq!(s.cuts.last().unwrap().positives, 4);
    }

    #[test]
    fn all_tied() {
        let s = sweep_thresholds(&[0.5; 4], &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            s.cuts.iter().map(|c| c.positives).collect::<Vec<_>>(),
            vec![0, 4]
        );
        assert_eq!(s.omitted, vec![1, 2, 3]);
    }

    #[test]
    fn adjacent_floats_still_separate() {
        let hi = 1.0f64;
        let lo = f64::from_bits(hi.to_bits() - 1);
        let t = cut_between(hi, lo);
        assert!(hi > t && lo <= t);
        let s = sweep_thresholds(&[lo, hi], &[0.0, 1.0]).unwrap();
        assert_eq!(s.cuts[1].errors, 0);
    }

    #[test]
    fn weighted_matches_unweighted_on_unit_weights() {
        let scores = [0.4, 0.1, 0.4, 0.8, 0.3];
        let labels = [1.0, 0.0, 0.0, 1.0, 1.0];
        let plain = sweep_thresholds(&scores, &labels).unwrap();
        let w = sweep_weighted(&scores, &labels, &[1.0; 5], &[true; 5]).unwrap();
        assert_eq!(plain.cuts.len(), w.len());
        for (a, b) in plain.cuts.iter().zip(&w) {
            assert_eq!(a.positives, b.positives);
            assert_eq!(a.threshold, b.threshold);
            assert!((a.errors as f64 / 5.0 - b.weighted_error).abs() < 1e-15);
        }
    }

    #[test]
    fn weighted_keeps_best_per_counted_positive() {
        // counted rows are 0 and 2; row 1 is an uncounted neighbour.
        let scores = [0.9, 0.5, 0.1];
        let labels = [1.0, 0.0, 0.0];
        let w = sweep_weighted(&scores, &labels, &[1.0, 0.5, 1.0], &[true, false, true]).unwrap();
        assert_eq!(
            w.iter().map(|c| c.positives).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert_eq!(w[1].weighted_error, 0.0);
        assert!(w[1].threshold > 0.5 && w[1].threshold < 0.9);
    }
}
