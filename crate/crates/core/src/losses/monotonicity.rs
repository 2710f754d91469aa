//! The swap form of monotonicity and a counterexample search.
//!
//! A loss is monotonic when, for any two rows `i, j` of the same group with
//! `y_i ≤ y_j` and `z_i ≤ z_j`, exchanging `z_i` and `z_j` never lowers it.
//! The only exchange that changes anything is a true negative paired with a
//! true positive, which turns into a false positive plus a false negative.
//!
//! Every catalog loss depends on an instance only through its per-group
//! counts of the four `(y, z)` types, so the exhaustive search enumerates
//! multisets of types instead of sequences. Each multiset stands for every
//! ordering of its rows; the search is complete over all sequences of length
//! up to `max_n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Exact, GroupTally, GroupTerms, Instance, LossSpec};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapEffect {
    Increased,
    Decreased,
    Unchanged,
}

/// Compares the loss after exchanging `z_i` and `z_j` (0-based rows) with the
/// loss before. Requires `g_i = g_j`, `y_i ≤ y_j` and `z_i ≤ z_j`, and a
/// binary instance.
pub fn swap_increases_loss(
    spec: &LossSpec,
    inst: &Instance,
    i: usize,
    j: usize,
) -> Result<SwapEffect> {
    let n = inst.len();
    if i >= n || j >= n {
        return Err(Error::SwapPrecondition(format!(
            "row index out of range for {n} rows"
        )));
    }
    if inst.groups[i] != inst.groups[j] {
        return Err(Error::SwapPrecondition(format!(
            "rows {i} and {j} are in different groups ({} vs {})",
            inst.groups[i], inst.groups[j]
        )));
    }
    if inst.labels[i] > inst.labels[j] || inst.classifications[i] > inst.classifications[j] {
        return Err(Error::SwapPrecondition(format!(
            "rows {i} and {j} are not aligned: need y_i <= y_j and z_i <= z_j"
        )));
    }
    let before = super::joint_loss_exact(spec, inst)?;
    let mut swapped = inst.clone();
    swapped.classifications.swap(i, j);
    let after = super::joint_loss_exact(spec, &swapped)?;
    Ok(match after.cmp(&before) {
        std::cmp::Ordering::Greater => SwapEffect::Increased,
        std::cmp::Ordering::Less => SwapEffect::Decreased,
        std::cmp::Ordering::Equal => SwapEffect::Unchanged,
    })
}

/// An aligned pair whose swap strictly lowers the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub instance: Instance,
    /// Row with `y = 0, z = 0`.
    pub i: usize,
    /// Row with `y = 1, z = 1`, same group as `i`.
    pub j: usize,
    pub before: f64,
    pub after: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    /// Every multiset of per-group `(y, z)` types with `1..=max_n` rows.
    Exhaustive,
    /// `budget` seeded random instances with `1..=max_n` rows.
    Random,
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub groups: usize,
    pub max_n: usize,
    /// Exhaustive mode: cap on multisets examined. Random mode: trial count.
    pub budget: u64,
    pub seed: u64,
    pub mode: SearchMode,
    pub exec: Exec,
}

impl SearchOptions {
    /// Exhaustive up to 16 rows, random above.
    pub fn new(groups: usize, max_n: usize, budget: u64, seed: u64) -> Self {
        Self {
            groups,
            max_n,
            budget,
            seed,
            mode: if max_n <= 16 {
                SearchMode::Exhaustive
            } else {
                SearchMode::Random
            },
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub witness: Option<Witness>,
    /// Multisets or trials examined.
    pub examined: u64,
    /// True when the exhaustive enumeration finished within budget.
    pub complete: bool,
}

/// Group count a loss implies: the profile length for fixed-profile losses,
/// otherwise 2.
fn default_groups(spec: &LossSpec) -> usize {
    match spec {
        LossSpec::FixedProfile { target } => target.len(),
        _ => 2,
    }
}

/// Searches for a swap that lowers `spec`. Exhaustive for `max_n ≤ 16`,
/// otherwise `budget` random trials drawn from `seed`.
pub fn find_monotonicity_counterexample(
    spec: &LossSpec,
    max_n: usize,
    budget: u64,
    seed: u64,
) -> Option<Witness> {
    let opts = SearchOptions::new(default_groups(spec), max_n, budget, seed);
    find_monotonicity_counterexample_with(spec, &opts)
        .ok()?
        .witness
}

pub fn find_monotonicity_counterexample_with(
    spec: &LossSpec,
    opts: &SearchOptions,
) -> Result<SearchReport> {
    spec.check(opts.groups)?;
    match opts.mode {
        SearchMode::Exhaustive => exhaustive(spec, opts),
        SearchMode::Random => Ok(random(spec, opts)),
    }
}

// Type index within a group: 2y + z.
const TN: usize = 0;
const FP: usize = 1;
const FN: usize = 2;
const TP: usize = 3;

fn tally_of(counts: &[u8]) -> GroupTally {
    let c = |t: usize| u64::from(counts[t]);
    GroupTally {
        rows: c(TN) + c(FP) + c(FN) + c(TP),
        label_positives: c(FN) + c(TP),
        predicted_positives: c(FP) + c(TP),
        false_positives: c(FP),
        false_negatives: c(FN),
    }
}

/// All ways to put `n` rows into `bins` bins, in lexicographic order.
fn compositions(n: usize, bins: usize) -> Vec<Vec<u8>> {
    fn go(rest: usize, bin: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if bin + 1 == cur.len() {
            cur[bin] = rest as u8;
            out.push(cur.clone());
            return;
        }
        for c in 0..=rest {
            cur[bin] = c as u8;
            go(rest - c, bin + 1, cur, out);
        }
    }
    let mut out = Vec::new();
    go(n, 0, &mut vec![0; bins], &mut out);
    out
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Loss before and after the TN/TP swap in group `k`, or `None` when the loss
/// is undefined on either side.
fn swap_pair(
    compiled: &super::CompiledLoss<Exact>,
    tallies: &[GroupTally],
    k: usize,
) -> Option<(Exact, Exact)> {
    let n: u64 = tallies.iter().map(|t| t.rows).sum();
    let terms: Vec<GroupTerms<Exact>> = tallies.iter().map(|t| t.terms(n)).collect();
    let before = compiled.evaluate(&terms).ok()?;
    let mut moved = tallies.to_vec();
    moved[k].false_positives += 1;
    moved[k].false_negatives += 1;
    let mut after_terms = terms;
    after_terms[k] = moved[k].terms(n);
    let after = compiled.evaluate(&after_terms).ok()?;
    Some((before, after))
}

fn witness_from_counts(
    counts: &[u8],
    groups: usize,
    k: usize,
    before: &Exact,
    after: &Exact,
) -> Witness {
    let mut g = Vec::new();
    let mut y = Vec::new();
    let mut z = Vec::new();
    let (mut i, mut j) = (0, 0);
    for grp in 0..groups {
        for t in 0..4 {
            for _ in 0..counts[grp * 4 + t] {
                if grp == k && t == TN {
                    i = g.len();
                }
                if grp == k && t == TP {
                    j = g.len();
                }
                g.push(grp + 1);
                y.push(if t >= FN { 1.0 } else { 0.0 });
                z.push(if t == FP || t == TP { 1.0 } else { 0.0 });
            }
        }
    }
    use super::Scalar;
    Witness {
        instance: Instance {
            num_groups: groups,
            groups: g,
            labels: y,
            classifications: z,
        },
        i,
        j,
        before: before.to_f64(),
        after: after.to_f64(),
    }
}

fn exhaustive(spec: &LossSpec, opts: &SearchOptions) -> Result<SearchReport> {
    let groups = opts.groups;
    let compiled = spec.compile::<Exact>(groups)?;
    let bins = 4 * groups;
    let mut examined = 0u64;
    for n in 1..=opts.max_n {
        let count = binomial((n + bins - 1) as u64, (bins - 1) as u64);
        if examined.saturating_add(count) > opts.budget {
            return Ok(SearchReport {
                witness: None,
                examined,
                complete: false,
            });
        }
        examined += count;
        let all = compositions(n, bins);
        let hit = exec::find_map_first(opts.exec, 0..all.len(), |idx| {
            let counts = &all[idx];
            let tallies: Vec<GroupTally> = (0..groups)
                .map(|k| tally_of(&counts[k * 4..k * 4 + 4]))
                .collect();
            if tallies.iter().any(|t| t.rows == 0) {
                return None;
            }
            (0..groups)
                .filter(|&k| counts[k * 4 + TN] > 0 && counts[k * 4 + TP] > 0)
                .find_map(|k| {
                    let (before, after) = swap_pair(&compiled, &tallies, k)?;
                    (after < before)
                        .then(|| witness_from_counts(counts, groups, k, &before, &after))
                })
        });
        if hit.is_some() {
            return Ok(SearchReport {
                witness: hit,
                examined,
                complete: true,
            });
        }
    }
    Ok(SearchReport {
        witness: None,
        examined,
        complete: true,
    })
}

fn random(spec: &LossSpec, opts: &SearchOptions) -> SearchReport {
    let groups = opts.groups;
    let max_n = opts.max_n.max(2);
    let witness = exec::find_map_first(opts.exec, 0..opts.budget as usize, |trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(trial as u64);
        let n = rng.random_range(2..=max_n);
        let mut inst = Instance {
            num_groups: groups,
            groups: (0..n).map(|_| rng.random_range(1..=groups)).collect(),
            labels: (0..n)
                .map(|_| f64::from(u8::from(rng.random::<bool>())))
                .collect(),
            classifications: (0..n)
                .map(|_| f64::from(u8::from(rng.random::<bool>())))
                .collect(),
        };
        // Plant an aligned TN/TP pair in a random group.
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i == j {
            return None;
        }
        inst.groups[j] = inst.groups[i];
        inst.labels[i] = 0.0;
        inst.classifications[i] = 0.0;
        inst.labels[j] = 1.0;
        inst.classifications[j] = 1.0;
        match swap_increases_loss(spec, &inst, i, j) {
            Ok(SwapEffect::Decreased) => {
                let before = super::joint_loss(spec, &inst).ok()?;
                let mut swapped = inst.clone();
                swapped.classifications.swap(i, j);
                let after = super::joint_loss(spec, &swapped).ok()?;
                Some(Witness {
                    instance: inst,
                    i,
                    j,
                    before,
                    after,
                })
            }
            _ => None,
        }
    });
    SearchReport {
        witness,
        examined: opts.budget,
        complete: false,
    }
}
