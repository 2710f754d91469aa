//! Per-group candidate generation and the product search over group choices.

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::learners::{Learner, WeightedSample};
use crate::losses::{
    exact_from_f64, find_monotonicity_counterexample, group_stats_with, CompiledLoss, ErrorMetric,
    Exact, GroupStats, GroupTally, GroupTerms, Instance, LossSpec, Scalar,
};
use crate::model::{CandidateClassifier, DecoupledClassifier};
use crate::transfer::TransferLearner;

/// A candidate with its statistics on its group's rows. `stats.p_hat` is
/// normalized by the total row count of the dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub candidate: CandidateClassifier,
    /// Exact counts (binary mode only).
    pub tally: Option<GroupTally>,
    pub stats: GroupStats,
}

/// Candidates per group with precomputed statistics. Holds no reference to
/// the data it was built from.
#[derive(Clone, Debug)]
pub struct CandidateTable {
    per_group: Vec<Vec<TableEntry>>,
    n: usize,
    mode: Mode,
}

impl CandidateTable {
    /// Evaluates every candidate on its own group's rows of `ds`. In binary
    /// mode the positive counts within a group must be distinct and must match
    /// the counts the learner reported.
    pub fn build(ds: &Dataset, candidates: Vec<Vec<CandidateClassifier>>) -> Result<Self> {
        if candidates.len() != ds.num_groups() {
            return Err(Error::InvalidParameter(format!(
                "{} candidate lists for {} groups",
                candidates.len(),
                ds.num_groups()
            )));
        }
        let n = ds.n();
        let metric = match ds.mode() {
            Mode::Binary => ErrorMetric::Absolute,
            Mode::Regression => ErrorMetric::Squared,
        };
        let mut per_group = Vec::with_capacity(candidates.len());
        for (k, list) in candidates.into_iter().enumerate() {
            let group = k + 1;
            let rows = ds.group_rows(group);
            if rows.is_empty() {
                return Err(Error::EmptyGroup { group });
            }
            if list.is_empty() {
                return Err(Error::ContractViolation {
                    group,
                    detail: "learner returned no candidates".into(),
                });
            }
            let labels: Vec<f64> = rows.iter().map(|&i| ds.label(i)).collect();
            let mut seen = std::collections::HashSet::new();
            let mut entries = Vec::with_capacity(list.len());
            for cand in list {
                let z: Vec<f64> = rows
                    .iter()
                    .map(|&i| cand.predictor.predict(ds.row(i)))
                    .collect();
                let inst = Instance::new(1, vec![1; rows.len()], labels.clone(), z)?;
                let tally = match ds.mode() {
                    Mode::Binary => {
                        let t = inst.tally().map_err(|_| Error::ContractViolation {
                            group,
                            detail: "candidate output is not binary".into(),
                        })?[0];
                        if t.predicted_positives as usize != cand.positives {
                            return Err(Error::ContractViolation {
                                group,
                                detail: format!(
                                    "candidate reports {} positives but classifies {}",
                                    cand.positives, t.predicted_positives
                                ),
                            });
                        }
                        if !seen.insert(t.predicted_positives) {
                            return Err(Error::ContractViolation {
                                group,
                                detail: format!(
                                    "two candidates with {} positives",
                                    t.predicted_positives
                                ),
                            });
                        }
                        Some(t)
                    }
                    Mode::Regression => None,
                };
                let mut stats = group_stats_with(&inst, metric)?
                    .remove(0)
                    .expect("nonempty group");
                stats.p_hat *= rows.len() as f64 / n as f64;
                entries.push(TableEntry {
                    candidate: cand,
                    tally,
                    stats,
                });
            }
            per_group.push(entries);
        }
        Ok(Self {
            per_group,
            n,
            mode: ds.mode(),
        })
    }

    pub fn num_groups(&self) -> usize {
        self.per_group.len()
    }

    pub fn group(&self, k: usize) -> &[TableEntry] {
        &self.per_group[k - 1]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.per_group.iter().map(Vec::len).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Size of the product space.
    pub fn combinations(&self) -> u64 {
        self.per_group
            .iter()
            .fold(1u64, |acc, g| acc.saturating_mul(g.len() as u64))
    }
}

/// The chosen candidate per group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// 0-based candidate index per group.
    pub indices: Vec<usize>,
    pub loss: f64,
    /// Whether the selection satisfies a strict loss's predicate. Always
    /// true for other losses.
    pub feasible: bool,
    /// A strict loss with no feasible combination at all. The selection then
    /// minimizes L1 among all combinations.
    pub parity_infeasible: bool,
    /// Loss evaluations performed.
    pub evaluations: u64,
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub max_groups: usize,
    pub exec: Exec,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_groups: 4,
            exec: Exec::default(),
        }
    }
}

struct Best<T> {
    idx: Vec<usize>,
    loss: T,
    l1: T,
    feasible: bool,
    any_feasible: bool,
}

fn better<T: Scalar>(a: &Best<T>, b: &Best<T>, strict: bool) -> bool {
    a.loss < b.loss || (strict && a.loss == b.loss && a.l1 < b.l1)
}

fn evaluate_at<T: Scalar>(
    loss: &CompiledLoss<T>,
    terms: &[Vec<GroupTerms<T>>],
    idx: &[usize],
    buf: &mut Vec<GroupTerms<T>>,
) -> Result<Best<T>> {
    buf.clear();
    buf.extend(idx.iter().enumerate().map(|(k, &i)| terms[k][i].clone()));
    let feasible = loss.feasible(buf);
    Ok(Best {
        idx: idx.to_vec(),
        loss: loss.evaluate(buf)?,
        l1: loss.l1_of(buf),
        feasible,
        any_feasible: feasible,
    })
}

/// Minimum over the full product, ties to the lexicographically smallest
/// index vector. Parallel over the first group's candidates.
fn full_search<T: Scalar>(
    loss: &CompiledLoss<T>,
    terms: &[Vec<GroupTerms<T>>],
    exec: Exec,
) -> Result<Best<T>> {
    let strict = loss.spec().is_strict();
    let k = terms.len();
    let partial = exec::map_range(exec, 0..terms[0].len(), |first| -> Result<Best<T>> {
        let mut idx = vec![0; k];
        idx[0] = first;
        let mut buf = Vec::with_capacity(k);
        let mut best = evaluate_at(loss, terms, &idx, &mut buf)?;
        loop {
            // Odometer over groups 2..K, last group fastest.
            let mut g = k - 1;
            loop {
                if g == 0 {
                    return Ok(best);
                }
                idx[g] += 1;
                if idx[g] < terms[g].len() {
                    break;
                }
                idx[g] = 0;
                g -= 1;
            }
            let cur = evaluate_at(loss, terms, &idx, &mut buf)?;
            let any = best.any_feasible || cur.feasible;
            if better(&cur, &best, strict) {
                best = cur;
            }
            best.any_feasible = any;
        }
    });
    let mut best: Option<Best<T>> = None;
    for r in partial {
        let cur = r?;
        best = Some(match best {
            None => cur,
            Some(mut b) => {
                let any = b.any_feasible || cur.any_feasible;
                if better(&cur, &b, strict) {
                    b = cur;
                }
                b.any_feasible = any;
                b
            }
        });
    }
    Ok(best.expect("at least one candidate in the first group"))
}

/// Balanced and L1 are sums of per-group terms that only grow with the
/// group's error, so the product minimum is the per-group minimum.
fn separable_search<T: Scalar>(
    loss: &CompiledLoss<T>,
    terms: &[Vec<GroupTerms<T>>],
) -> Result<Best<T>> {
    let idx: Vec<usize> = terms
        .iter()
        .map(|g| {
            let mut best = 0;
            for (i, t) in g.iter().enumerate() {
                if t.ell < g[best].ell {
                    best = i;
                }
            }
            best
        })
        .collect();
    evaluate_at(loss, terms, &idx, &mut Vec::new())
}

fn exact_terms(table: &CandidateTable) -> Vec<Vec<GroupTerms<Exact>>> {
    let n = table.n as u64;
    table
        .per_group
        .iter()
        .map(|g| {
            g.iter()
                .map(|e| e.tally.expect("binary table").terms(n))
                .collect()
        })
        .collect()
}

fn real_terms(table: &CandidateTable) -> Vec<Vec<GroupTerms<f64>>> {
    table
        .per_group
        .iter()
        .map(|g| g.iter().map(|e| e.stats.terms(table.n)).collect())
        .collect()
}

fn finish<T: Scalar>(best: Best<T>, evaluations: u64) -> Selection {
    Selection {
        loss: best.loss.to_f64(),
        feasible: best.feasible,
        parity_infeasible: !best.any_feasible,
        indices: best.idx,
        evaluations,
    }
}

fn fixed_profile(table: &CandidateTable, spec: &LossSpec, target: &[f64]) -> Result<Selection> {
    let n = table.n as u64;
    let mut idx = Vec::with_capacity(target.len());
    for (k, (&p, group)) in target.iter().zip(&table.per_group).enumerate() {
        let want = exact_from_f64(p)
            .ok_or_else(|| Error::IncompatibleLoss(format!("target {p} has no exact form")))?
            * Exact::from_integer(i128::from(n));
        let found = want
            .is_integer()
            .then(|| {
                group.iter().position(|e| {
                    Exact::from_integer(e.tally.unwrap().predicted_positives as i128) == want
                })
            })
            .flatten();
        match found {
            Some(i) => idx.push(i),
            None => {
                let nearest = group
                    .iter()
                    .map(|e| e.tally.unwrap().predicted_positives)
                    .min_by(|a, b| {
                        let da = (Exact::from_integer(*a as i128) - want).abs();
                        let db = (Exact::from_integer(*b as i128) - want).abs();
                        da.cmp(&db).then(a.cmp(b))
                    })
                    .unwrap_or(0);
                return Err(Error::ProfileUnachievable {
                    group: k + 1,
                    target: want.to_f64(),
                    nearest,
                });
            }
        }
    }
    let loss = spec.compile::<Exact>(table.num_groups())?;
    let terms = exact_terms(table);
    Ok(finish(
        evaluate_at(&loss, &terms, &idx, &mut Vec::new())?,
        1,
    ))
}

/// Exact minimizer of `spec` over one candidate per group, computed from the
/// table's statistics alone.
pub fn product_search(
    table: &CandidateTable,
    spec: &LossSpec,
    cfg: &SearchConfig,
) -> Result<Selection> {
    let k = table.num_groups();
    if k > cfg.max_groups {
        return Err(Error::TooManyGroups {
            groups: k,
            cap: cfg.max_groups,
        });
    }
    spec.check(k)?;
    let separable = matches!(spec, LossSpec::L1 | LossSpec::Balanced);
    let evaluations = if separable {
        table.sizes().iter().map(|&s| s as u64).sum()
    } else {
        table.combinations()
    };
    match table.mode {
        Mode::Binary => {
            if let LossSpec::FixedProfile { target } = spec {
                return fixed_profile(table, spec, target);
            }
            let loss = spec.compile::<Exact>(k)?;
            let terms = exact_terms(table);
            let best = if separable {
                separable_search(&loss, &terms)?
            } else {
                full_search(&loss, &terms, cfg.exec)?
            };
            Ok(finish(best, evaluations))
        }
        Mode::Regression => {
            if !spec.is_error_only() {
                return Err(Error::IncompatibleLoss(format!(
                    "`{spec}` needs binary classifications; regression mode accepts balanced, l1 and absgap"
                )));
            }
            let loss = spec.compile::<f64>(k)?;
            let terms = real_terms(table);
            let best = if separable {
                separable_search(&loss, &terms)?
            } else {
                full_search(&loss, &terms, cfg.exec)?
            };
            Ok(finish(best, evaluations))
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct DecoupleConfig {
    pub search: SearchConfig,
    /// Reject losses for which a small exhaustive search finds a swap that
    /// lowers the loss.
    pub check_monotonic: bool,
}

/// Everything `decouple` computed on the way to its classifier.
#[derive(Clone, Debug)]
pub struct DecoupleOutcome {
    pub classifier: DecoupledClassifier,
    pub table: CandidateTable,
    pub selection: Selection,
}

fn precheck(spec: &LossSpec, ds: &Dataset, cfg: &DecoupleConfig) -> Result<()> {
    ds.ensure_valid()?;
    let k = ds.num_groups();
    if k > cfg.search.max_groups {
        return Err(Error::TooManyGroups {
            groups: k,
            cap: cfg.search.max_groups,
        });
    }
    spec.check(k)?;
    if let Some(g) = ds.group_counts().iter().position(|&c| c == 0) {
        return Err(Error::EmptyGroup { group: g + 1 });
    }
    if ds.mode() == Mode::Regression && !spec.is_error_only() {
        return Err(Error::IncompatibleLoss(format!(
            "`{spec}` is not available in regression mode"
        )));
    }
    if cfg.check_monotonic {
        if let Some(w) = find_monotonicity_counterexample(spec, 6, u64::MAX, 0) {
            return Err(Error::IncompatibleLoss(format!(
                "`{spec}` is not monotonic: swapping rows {} and {} lowers it from {} to {}",
                w.i, w.j, w.before, w.after
            )));
        }
    }
    Ok(())
}

fn assemble(
    spec: &LossSpec,
    ds: &Dataset,
    candidates: Vec<Vec<CandidateClassifier>>,
    cfg: &DecoupleConfig,
) -> Result<DecoupleOutcome> {
    let table = CandidateTable::build(ds, candidates)?;
    let selection = product_search(&table, spec, &cfg.search)?;
    let per_group = selection
        .indices
        .iter()
        .enumerate()
        .map(|(k, &i)| table.per_group[k][i].candidate.predictor.clone())
        .collect();
    let mut classifier = DecoupledClassifier::new(per_group, selection.loss, spec.id());
    classifier.input_dim = Some(ds.d());
    Ok(DecoupleOutcome {
        classifier,
        table,
        selection,
    })
}

/// Runs `learner` once per group on that group's rows and picks the
/// combination minimizing `spec`.
pub fn decouple<L: Learner + ?Sized>(
    learner: &L,
    spec: &LossSpec,
    ds: &Dataset,
) -> Result<DecoupledClassifier> {
    Ok(decouple_with(learner, spec, ds, &DecoupleConfig::default())?.classifier)
}

pub fn decouple_with<L: Learner + ?Sized>(
    learner: &L,
    spec: &LossSpec,
    ds: &Dataset,
    cfg: &DecoupleConfig,
) -> Result<DecoupleOutcome> {
    precheck(spec, ds, cfg)?;
    let candidates = (1..=ds.num_groups())
        .map(|k| learner.learn(ds, &WeightedSample::uniform(&ds.group_rows(k))))
        .collect::<Result<Vec<_>>>()?;
    assemble(spec, ds, candidates, cfg)
}

/// Like [`decouple`], but each group's candidates come from a transfer
/// learner that also sees the other groups' rows.
pub fn general_decouple<T: TransferLearner + ?Sized>(
    transfer: &T,
    spec: &LossSpec,
    ds: &Dataset,
) -> Result<DecoupledClassifier> {
    Ok(general_decouple_with(transfer, spec, ds, &DecoupleConfig::default())?.classifier)
}

pub fn general_decouple_with<T: TransferLearner + ?Sized>(
    transfer: &T,
    spec: &LossSpec,
    ds: &Dataset,
    cfg: &DecoupleConfig,
) -> Result<DecoupleOutcome> {
    precheck(spec, ds, cfg)?;
    let candidates = (1..=ds.num_groups())
        .map(|k| transfer.candidates(ds, k, &ds.group_rows(k), &ds.out_group_rows(k)))
        .collect::<Result<Vec<_>>>()?;
    assemble(spec, ds, candidates, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{Exhaustive, FeatureThreshold, FiniteClass};
    use crate::losses::joint_loss;
    use crate::model::{LinearModel, Predictor};

    fn parity() -> Dataset {
        let xs = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let y = vec![0.0, 1.0, 1.0, 0.0];
        Dataset::new(xs, y, vec![1, 2, 1, 2], 2, Mode::Binary, None).unwrap()
    }

    fn x1_thresholds() -> FiniteClass {
        FiniteClass::new(vec![
            Predictor::Threshold {
                score: LinearModel::coordinate(2, 0),
                threshold: 0.5,
            },
            Predictor::Threshold {
                score: LinearModel::new(vec![-1.0, 0.0], 0.0),
                threshold: -0.5,
            },
        ])
        .unwrap()
    }

    #[test]
    fn parity_is_decoupled_perfectly() {
        let dc = decouple(&Exhaustive::new(x1_thresholds()), &LossSpec::L1, &parity()).unwrap();
        assert_eq!(dc.achieved_loss, 0.0);
    }

    #[test]
    fn single_group_picks_best_candidate() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let ds = Dataset::new(xs, y, vec![1; 6], 1, Mode::Binary, None).unwrap();
        let out = decouple_with(
            &FeatureThreshold { column: 0 },
            &LossSpec::L1,
            &ds,
            &DecoupleConfig::default(),
        )
        .unwrap();
        let best = out
            .table
            .group(1)
            .iter()
            .map(|e| e.stats.ell)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.selection.loss, best);
        assert_eq!(out.selection.evaluations, out.table.sizes()[0] as u64);
    }

    #[test]
    fn duplicate_positive_counts_rejected() {
        let ds = parity();
        let c = Exhaustive::new(x1_thresholds())
            .learn(&ds, &WeightedSample::uniform(&ds.group_rows(1)))
            .unwrap();
        let dup = vec![vec![c[0].clone(), c[0].clone()], c.clone()];
        assert!(matches!(
            CandidateTable::build(&ds, dup),
            Err(Error::ContractViolation { group: 1, .. })
        ));
    }

    #[test]
    fn empty_group_rejected() {
        let ds = Dataset::from_parts(vec![vec![0.0]], vec![0.0], vec![1], 2, Mode::Binary, None)
            .with_empty_groups_allowed(true);
        let err = decouple(&FeatureThreshold { column: 0 }, &LossSpec::L1, &ds).unwrap_err();
        assert!(matches!(err, Error::EmptyGroup { group: 2 }));
    }

    /// Table from explicit per-group labelings on a dataset whose feature is
    /// the row index.
    fn table_from(
        labels: &[f64],
        groups: &[usize],
        k: usize,
        choices: &[Vec<Vec<f64>>],
    ) -> (Dataset, CandidateTable) {
        let n = labels.len();
        let ds = Dataset::new(
            (0..n).map(|i| vec![i as f64]).collect(),
            labels.to_vec(),
            groups.to_vec(),
            k,
            Mode::Binary,
            None,
        )
        .unwrap();
        let cands = (1..=k)
            .map(|g| {
                let rows = ds.group_rows(g);
                choices[g - 1]
                    .iter()
                    .map(|z| {
                        let entries = rows
                            .iter()
                            .zip(z)
                            .map(|(&r, &v)| (vec![r as f64], v))
                            .collect();
                        let p = Predictor::Table {
                            entries,
                            default: 0.0,
                        };
                        let preds: Vec<f64> = rows.iter().map(|&r| p.predict(ds.row(r))).collect();
                        crate::learners::candidate_from_predictions(
                            &ds,
                            &WeightedSample::uniform(&rows),
                            p,
                            &preds,
                        )
                        .unwrap()
                    })
                    .collect()
            })
            .collect();
        let t = CandidateTable::build(&ds, cands).unwrap();
        (ds, t)
    }

    fn naive(ds: &Dataset, table: &CandidateTable, spec: &LossSpec) -> f64 {
        let sizes = table.sizes();
        let mut best = f64::INFINITY;
        let mut idx = vec![0; sizes.len()];
        loop {
            let z: Vec<f64> = (0..ds.n())
                .map(|i| {
                    table.group(ds.group(i))[idx[ds.group(i) - 1]]
                        .candidate
                        .predictor
                        .predict(ds.row(i))
                })
                .collect();
            let inst = Instance::new(
                ds.num_groups(),
                ds.groups().to_vec(),
                ds.labels().to_vec(),
                z,
            )
            .unwrap();
            best = best.min(joint_loss(spec, &inst).unwrap());
            let mut g = sizes.len();
            loop {
                if g == 0 {
                    return best;
                }
                g -= 1;
                idx[g] += 1;
                if idx[g] < sizes[g] {
                    break;
                }
                idx[g] = 0;
            }
        }
    }

    #[test]
    fn three_by_four_matches_naive() {
        let labels = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let groups = [1, 1, 1, 2, 2, 2, 2];
        let choices = vec![
            vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![1.0, 1.0, 1.0],
            ],
            vec![
                vec![0.0; 4],
                vec![0.0, 1.0, 0.0, 0.0],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0; 4],
            ],
        ];
        let (ds, t) = table_from(&labels, &groups, 2, &choices);
        for spec in [
            LossSpec::L1,
            LossSpec::Balanced,
            LossSpec::NumericalParity { lambda: 0.3 },
            LossSpec::DemographicParity { lambda: 0.6 },
            LossSpec::StrictNumericalParity,
        ] {
            let sel = product_search(&t, &spec, &SearchConfig::default()).unwrap();
            assert_eq!(sel.loss, naive(&ds, &t, &spec), "{spec}");
        }
        let sel = product_search(
            &t,
            &LossSpec::AbsGap { lambda: 0.25 },
            &SearchConfig::default(),
        )
        .unwrap();
        assert_eq!(sel.evaluations, 12);
    }

    #[test]
    fn fixed_profile_short_circuit() {
        let labels = [1.0, 0.0, 1.0, 0.0];
        let choices = vec![
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        ];
        let (_, t) = table_from(&labels, &[1, 1, 2, 2], 2, &choices);
        let spec = LossSpec::FixedProfile {
            target: vec![0.25, 0.25],
        };
        let sel = product_search(&t, &spec, &SearchConfig::default()).unwrap();
        assert_eq!(sel.indices, vec![1, 1]);
        assert_eq!(sel.evaluations, 1);
        assert_eq!(sel.loss, 0.0);
        let bad = LossSpec::FixedProfile {
            target: vec![0.25, 0.5],
        };
        let err = product_search(&t, &bad, &SearchConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::ProfileUnachievable {
                group: 2,
                nearest: 1,
                ..
            }
        ));
    }

    #[test]
    fn strict_parity_infeasible_falls_back_to_l1() {
        // Group 1 can only have 0 positives, group 2 only 1 or 2.
        let labels = [0.0, 0.0, 1.0, 1.0];
        let choices = vec![vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0], vec![1.0, 1.0]]];
        let (_, t) = table_from(&labels, &[1, 1, 2, 2], 2, &choices);
        let sel = product_search(
            &t,
            &LossSpec::StrictNumericalParity,
            &SearchConfig::default(),
        )
        .unwrap();
        assert_eq!(sel.loss, 1.0);
        assert!(sel.parity_infeasible);
        assert!(!sel.feasible);
        assert_eq!(sel.indices, vec![0, 1]);
    }

    #[test]
    fn group_cap() {
        let labels = [0.0; 5];
        let groups = [1, 2, 3, 4, 5];
        let choices = vec![vec![vec![0.0]]; 5];
        let (_, t) = table_from(&labels, &groups, 5, &choices);
        assert!(matches!(
            product_search(&t, &LossSpec::L1, &SearchConfig::default()),
            Err(Error::TooManyGroups { groups: 5, cap: 4 })
        ));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let labels = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let groups = [1, 1, 1, 2, 2, 2, 2];
        let choices = vec![
            vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![1.0, 1.0, 0.0],
                vec![1.0, 1.0, 1.0],
            ],
            vec![
                vec![0.0; 4],
                vec![0.0, 1.0, 0.0, 0.0],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0; 4],
            ],
        ];
        let (_, t) = table_from(&labels, &groups, 2, &choices);
        let spec = LossSpec::NumericalParity { lambda: 0.5 };
        let a = product_search(
            &t,
            &spec,
            &SearchConfig {
                max_groups: 4,
                exec: Exec::Sequential,
            },
        )
        .unwrap();
        let b = product_search(
            &t,
            &spec,
            &SearchConfig {
                max_groups: 4,
                exec: Exec::Parallel,
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
