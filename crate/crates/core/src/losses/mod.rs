//! Group statistics, the joint-loss catalog, and monotonicity checks.
//!
//! A joint loss maps a whole sequence of `(group, label, classification)`
//! triples to a real number. Every loss in the catalog depends on the triples
//! only through per-group counts, so all of them are evaluated from
//! [`GroupTally`] values (binary data, exact) or [`GroupStats`] values
//! (fractional classifications or squared error, floating point).

mod exact;
mod monotonicity;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::format_float;
use crate::error::{Error, Result};

pub use exact::{exact_from_f64, ratio, Exact, Scalar};
pub use monotonicity::{
    find_monotonicity_counterexample, find_monotonicity_counterexample_with, swap_increases_loss,
    SearchMode, SearchOptions, SearchReport, SwapEffect, Witness,
};

/// One joint loss from the catalog, with its parameters.
///
/// The enum shape enforces the parameter rules: `λ` exists exactly for the
/// weighted-parity variants and the absolute-gap loss, `p*` exactly for the
/// fixed-profile loss. Group count `K` comes from the data it is applied to.
#[derive(Clone, Debug, PartialEq)]
pub enum LossSpec {
    /// `(1/K) Σ ℓ_k`
    Balanced,
    /// `Σ (n_k/n) ℓ_k`
    L1,
    /// `L1` if every profile `p_k` is equal, else 1.
    StrictNumericalParity,
    /// `λ L1 + (1−λ) Σ |p_k − mean(p)|`
    NumericalParity { lambda: f64 },
    /// `L1` if every within-group positive rate `p_k n/n_k` is equal, else 1.
    StrictDemographicParity,
    /// `λ L1 + (1−λ) Σ |p_k n/n_k − mean|`
    DemographicParity { lambda: f64 },
    /// `L1` if `p_k = p*_k` for every k, else 1.
    FixedProfile { target: Vec<f64> },
    /// `λ L1 + (1−λ) Σ |FNR_k − mean(FNR)|`
    FnrParity { lambda: f64 },
    /// `(1−λ)(ℓ_1 + ℓ_2) + λ |ℓ_1 − ℓ_2|`, two groups only.
    AbsGap { lambda: f64 },
}

impl LossSpec {
    pub fn lambda(&self) -> Option<f64> {
        match self {
            LossSpec::NumericalParity { lambda }
            | LossSpec::DemographicParity { lambda }
            | LossSpec::FnrParity { lambda }
            | LossSpec::AbsGap { lambda } => Some(*lambda),
            _ => None,
        }
    }

    /// Losses equal to L1 on a feasible set and 1 elsewhere.
    pub fn is_strict(&self) -> bool {
        matches!(
            self,
            LossSpec::StrictNumericalParity
                | LossSpec::StrictDemographicParity
                | LossSpec::FixedProfile { .. }
        )
    }

    /// Whether the loss is known to be monotonic. Only the FNR-parity loss and
    /// the absolute-gap loss with `λ > 1/2` are not.
    pub fn is_monotonic(&self) -> bool {
        match self {
            LossSpec::FnrParity { .. } => false,
            LossSpec::AbsGap { lambda } => *lambda <= 0.5,
            _ => true,
        }
    }

    /// Losses that only read `ℓ_k` and group sizes, and so accept real-valued
    /// (regression) group losses.
    pub fn is_error_only(&self) -> bool {
        matches!(
            self,
            LossSpec::Balanced | LossSpec::L1 | LossSpec::AbsGap { .. }
        )
    }

    /// Canonical string form, as accepted by [`FromStr`].
    pub fn id(&self) -> String {
        self.to_string()
    }

    /// Checks parameters and compatibility with `k` groups.
    pub fn check(&self, k: usize) -> Result<()> {
        if let Some(l) = self.lambda() {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::IncompatibleLoss(format!("lambda {l} outside [0,1]")));
            }
        }
        match self {
            LossSpec::FixedProfile { target } => {
                if target.len() != k {
                    return Err(Error::IncompatibleLoss(format!(
                        "fixed profile has {} entries but there are {k} groups",
                        target.len()
                    )));
                }
                if let Some(p) = target.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(Error::IncompatibleLoss(format!(
                        "target profile {p} outside [0,1]"
                    )));
                }
            }
            LossSpec::AbsGap { .. } if k != 2 => {
                return Err(Error::IncompatibleLoss(format!(
                    "absgap needs exactly 2 groups, got {k}"
                )));
            }
            _ => {}
        }
        Ok(())
    }

    /// Resolves parameters into `T`, ready for repeated evaluation.
    pub fn compile<T: Scalar>(&self, k: usize) -> Result<CompiledLoss<T>> {
        self.check(k)?;
        let to_t = |x: f64| -> Result<T> {
            exact_from_f64(x)
                .map(|q| T::from_exact(&q))
                .ok_or_else(|| Error::IncompatibleLoss(format!("parameter {x} has no exact form")))
        };
        let lambda = match self.lambda() {
            Some(l) => to_t(l)?,
            None => T::one(),
        };
        let target = match self {
            LossSpec::FixedProfile { target } => {
                target.iter().map(|&p| to_t(p)).collect::<Result<_>>()?
            }
            _ => Vec::new(),
        };
        Ok(CompiledLoss {
            spec: self.clone(),
            k,
            one_minus_lambda: T::one() - lambda.clone(),
            lambda,
            target,
            k_t: T::from_count(k as u64),
        })
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::Balanced => write!(f, "balanced"),
            LossSpec::L1 => write!(f, "l1"),
            LossSpec::StrictNumericalParity => write!(f, "np-strict"),
            LossSpec::NumericalParity { lambda } => {
                write!(f, "np:lambda={}", format_float(*lambda))
            }
            LossSpec::StrictDemographicParity => write!(f, "dp-strict"),
            LossSpec::DemographicParity { lambda } => {
                write!(f, "dp:lambda={}", format_float(*lambda))
            }
            LossSpec::FixedProfile { target } => {
                let parts: Vec<String> = target.iter().map(|p| format_float(*p)).collect();
                write!(f, "fixed:p={}", parts.join(","))
            }
            LossSpec::FnrParity { lambda } => write!(f, "fnr:lambda={}", format_float(*lambda)),
            LossSpec::AbsGap { lambda } => write!(f, "absgap:lambda={}", format_float(*lambda)),
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let fail = |reason: &str| Error::LossParse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let s = input.trim().to_ascii_lowercase();
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s.as_str(), None),
        };
        let param = |key: &str| -> Result<&str> {
            let p = params.ok_or_else(|| fail(&format!("missing `{key}=` parameter")))?;
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| fail(&format!("expected `{key}=<value>`")))?;
            if k.trim() != key {
                return Err(fail(&format!("unknown parameter `{}`", k.trim())));
            }
            Ok(v.trim())
        };
        let number = |v: &str| -> Result<f64> {
            let x: f64 = v
                .parse()
                .map_err(|_| fail(&format!("`{v}` is not a number")))?;
            if !(0.0..=1.0).contains(&x) {
                return Err(fail(&format!("{x} outside [0,1]")));
            }
            Ok(x)
        };
        let lambda = || -> Result<f64> { number(param("lambda")?) };
        let no_params = |spec: LossSpec| -> Result<LossSpec> {
            match params {
                None => Ok(spec),
                Some(_) => Err(fail("takes no parameters")),
            }
        };
        match name {
            "balanced" | "b" => no_params(LossSpec::Balanced),
            "l1" => no_params(LossSpec::L1),
            "np-strict" => no_params(LossSpec::StrictNumericalParity),
            "np" => Ok(LossSpec::NumericalParity { lambda: lambda()? }),
            "dp-strict" => no_params(LossSpec::StrictDemographicParity),
            "dp" => Ok(LossSpec::DemographicParity { lambda: lambda()? }),
            "fixed" => {
                let target = param("p")?
                    .split(',')
                    .map(|v| number(v.trim()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(LossSpec::FixedProfile { target })
            }
            "fnr" => Ok(LossSpec::FnrParity { lambda: lambda()? }),
            "absgap" => Ok(LossSpec::AbsGap { lambda: lambda()? }),
            _ => Err(fail("unknown loss")),
        }
    }
}

impl Serialize for LossSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LossSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-group inputs to a loss formula.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupTerms<T> {
    /// `n_k / n`
    pub share: T,
    /// `ℓ_k`
    pub ell: T,
    /// `p_k`, positives normalized by total `n`.
    pub profile: T,
    /// `p_k n / n_k`, positives normalized by `n_k`.
    pub rate: T,
    pub fnr: Option<T>,
}

/// A [`LossSpec`] with parameters converted into `T`.
#[derive(Clone, Debug)]
pub struct CompiledLoss<T> {
    spec: LossSpec,
    k: usize,
    lambda: T,
    one_minus_lambda: T,
    target: Vec<T>,
    k_t: T,
}

impl<T: Scalar> CompiledLoss<T> {
    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    fn l1(terms: &[GroupTerms<T>]) -> T {
        terms
            .iter()
            .fold(T::zero(), |acc, t| acc + t.share.clone() * t.ell.clone())
    }

    fn spread(&self, values: impl Iterator<Item = T> + Clone) -> T {
        let mean = values.clone().fold(T::zero(), |a, v| a + v) / self.k_t.clone();
        values.fold(T::zero(), |a, v| a + (v - mean.clone()).abs())
    }

    fn all_equal(values: impl Iterator<Item = T>) -> bool {
        let mut it = values;
        match it.next() {
            None => true,
            Some(first) => it.all(|v| v == first),
        }
    }

    /// The loss value. `terms` must have one entry per group.
    pub fn evaluate(&self, terms: &[GroupTerms<T>]) -> Result<T> {
        debug_assert_eq!(terms.len(), self.k);
        let weighted = |parity: T| {
            self.lambda.clone() * Self::l1(terms) + self.one_minus_lambda.clone() * parity
        };
        let strict = |ok: bool| if ok { Self::l1(terms) } else { T::one() };
        Ok(match &self.spec {
            LossSpec::Balanced => {
                terms.iter().fold(T::zero(), |a, t| a + t.ell.clone()) / self.k_t.clone()
            }
            LossSpec::L1 => Self::l1(terms),
            LossSpec::StrictNumericalParity => {
                strict(Self::all_equal(terms.iter().map(|t| t.profile.clone())))
            }
            LossSpec::NumericalParity { .. } => {
                weighted(self.spread(terms.iter().map(|t| t.profile.clone())))
            }
            LossSpec::StrictDemographicParity => {
                strict(Self::all_equal(terms.iter().map(|t| t.rate.clone())))
            }
            LossSpec::DemographicParity { .. } => {
                weighted(self.spread(terms.iter().map(|t| t.rate.clone())))
            }
            LossSpec::FixedProfile { .. } => {
                strict(terms.iter().zip(&self.target).all(|(t, p)| &t.profile == p))
            }
            LossSpec::FnrParity { .. } => {
                let mut fnrs = Vec::with_capacity(terms.len());
                for (k, t) in terms.iter().enumerate() {
                    fnrs.push(t.fnr.clone().ok_or(Error::FnrUndefined { group: k + 1 })?);
                }
                weighted(self.spread(fnrs.into_iter()))
            }
            LossSpec::AbsGap { .. } => {
                let (a, b) = (terms[0].ell.clone(), terms[1].ell.clone());
                self.one_minus_lambda.clone() * (a.clone() + b.clone())
                    + self.lambda.clone() * (a - b).abs()
            }
        })
    }

    /// Secondary key for strict losses: the plain L1 loss.
    pub fn l1_of(&self, terms: &[GroupTerms<T>]) -> T {
        Self::l1(terms)
    }

    /// Whether a strict loss's feasibility predicate holds. Always true for
    /// non-strict losses.
    pub fn feasible(&self, terms: &[GroupTerms<T>]) -> bool {
        match &self.spec {
            LossSpec::StrictNumericalParity => {
                Self::all_equal(terms.iter().map(|t| t.profile.clone()))
            }
            LossSpec::StrictDemographicParity => {
                Self::all_equal(terms.iter().map(|t| t.rate.clone()))
            }
            LossSpec::FixedProfile { .. } => {
                terms.iter().zip(&self.target).all(|(t, p)| &t.profile == p)
            }
            _ => true,
        }
    }
}

/// A full sequence of `(g_i, y_i, z_i)` triples. Groups are 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub num_groups: usize,
    pub groups: Vec<usize>,
    pub labels: Vec<f64>,
    pub classifications: Vec<f64>,
}

impl Instance {
    pub fn new(
        num_groups: usize,
        groups: Vec<usize>,
        labels: Vec<f64>,
        classifications: Vec<f64>,
    ) -> Result<Self> {
        let inst = Self {
            num_groups,
            groups,
            labels,
            classifications,
        };
        inst.check()?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.labels.len();
        if self.groups.len() != n || self.classifications.len() != n {
            return Err(Error::InvalidDataset(format!(
                "instance lengths differ: {} groups, {} labels, {} classifications",
                self.groups.len(),
                n,
                self.classifications.len()
            )));
        }
        if self.num_groups == 0 {
            return Err(Error::InvalidDataset("instance has zero groups".into()));
        }
        if let Some(&g) = self.groups.iter().find(|&&g| g == 0 || g > self.num_groups) {
            return Err(Error::GroupOutOfRange {
                group: g,
                groups: self.num_groups,
            });
        }
        Ok(())
    }

    fn labels_binary(&self) -> bool {
        self.labels.iter().all(|&y| y == 0.0 || y == 1.0)
    }

    /// Labels and classifications both in {0,1}.
    pub fn is_binary(&self) -> bool {
        self.labels_binary() && self.classifications.iter().all(|&z| z == 0.0 || z == 1.0)
    }

    /// Exact per-group counts. Requires a binary instance.
    pub fn tally(&self) -> Result<Vec<GroupTally>> {
        self.check()?;
        if !self.is_binary() {
            return Err(Error::IncompatibleLoss(
                "counting needs labels and classifications in {0,1}".into(),
            ));
        }
        let mut out = vec![GroupTally::default(); self.num_groups];
        for i in 0..self.len() {
            out[self.groups[i] - 1].add(self.labels[i] == 1.0, self.classifications[i] == 1.0);
        }
        Ok(out)
    }
}

/// Exact counts for one group of a binary instance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupTally {
    pub rows: u64,
    pub label_positives: u64,
    pub predicted_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl GroupTally {
    pub fn add(&mut self, y: bool, z: bool) {
        self.rows += 1;
        self.label_positives += u64::from(y);
        self.predicted_positives += u64::from(z);
        self.false_positives += u64::from(z && !y);
        self.false_negatives += u64::from(y && !z);
    }

    pub fn errors(&self) -> u64 {
        self.false_positives + self.false_negatives
    }

    /// Loss terms for this group, with `n` the total row count.
    pub fn terms<T: Scalar>(&self, n: u64) -> GroupTerms<T> {
        let q = |num: u64, den: u64| T::from_exact(&ratio(num, den));
        GroupTerms {
            share: q(self.rows, n),
            ell: q(self.errors(), self.rows),
            profile: q(self.predicted_positives, n),
            rate: q(self.predicted_positives, self.rows),
            fnr: (self.label_positives > 0).then(|| q(self.false_negatives, self.label_positives)),
        }
    }

    pub fn exact_stats(&self, n: u64) -> ExactGroupStats {
        ExactGroupStats {
            n_k: self.rows,
            pi: ratio(self.label_positives, self.rows),
            p_hat: ratio(self.predicted_positives, n),
            ell: ratio(self.errors(), self.rows),
            fp: ratio(self.false_positives, self.rows),
            fn_: ratio(self.false_negatives, self.rows),
            fnr: (self.label_positives > 0)
                .then(|| ratio(self.false_negatives, self.label_positives)),
        }
    }
}

/// Exact per-group statistics of a binary instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactGroupStats {
    pub n_k: u64,
    pub pi: Exact,
    pub p_hat: Exact,
    pub ell: Exact,
    pub fp: Exact,
    pub fn_: Exact,
    pub fnr: Option<Exact>,
}

/// Per-group statistics in floating point.
///
/// `p_hat` is normalized by the total row count `n`, not by `n_k`; the
/// within-group positive rate is `p_hat * n / n_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n_k: usize,
    /// Base rate `π_k`, mean label.
    pub pi: f64,
    pub p_hat: f64,
    /// Group loss `ℓ_k`.
    pub ell: f64,
    /// False-positive fraction; present when labels are binary.
    pub fp: Option<f64>,
    /// False-negative fraction; present when labels are binary.
    pub fn_: Option<f64>,
    /// `FN_k / π_k`; absent when labels are not binary or `π_k = 0`.
    pub fnr: Option<f64>,
}

impl GroupStats {
    pub fn terms(&self, n: usize) -> GroupTerms<f64> {
        GroupTerms {
            share: self.n_k as f64 / n as f64,
            ell: self.ell,
            profile: self.p_hat,
            rate: self.p_hat * n as f64 / self.n_k as f64,
            fnr: self.fnr,
        }
    }
}

/// How `ℓ_k` is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    /// Mean `|y − z|`.
    Absolute,
    /// Mean `(y − z)²`.
    Squared,
}

/// Per-group statistics with absolute error. Empty groups yield `None`.
pub fn group_stats(inst: &Instance) -> Result<Vec<Option<GroupStats>>> {
    group_stats_with(inst, ErrorMetric::Absolute)
}

pub fn group_stats_with(inst: &Instance, metric: ErrorMetric) -> Result<Vec<Option<GroupStats>>> {
    inst.check()?;
    let n = inst.len();
    let k = inst.num_groups;
    let binary_labels = inst.labels_binary();
    let mut rows = vec![0usize; k];
    let mut sum_y = vec![0.0; k];
    let mut sum_z = vec![0.0; k];
    let mut sum_err = vec![0.0; k];
    let mut sum_fp = vec![0.0; k];
    let mut sum_fn = vec![0.0; k];
    for i in 0..n {
        let g = inst.groups[i] - 1;
        let (y, z) = (inst.labels[i], inst.classifications[i]);
        rows[g] += 1;
        sum_y[g] += y;
        sum_z[g] += z;
        sum_err[g] += match metric {
            ErrorMetric::Absolute => (y - z).abs(),
            ErrorMetric::Squared => (y - z) * (y - z),
        };
        sum_fp[g] += z * (1.0 - y);
        sum_fn[g] += (1.0 - z) * y;
    }
    Ok((0..k)
        .map(|g| {
            let n_k = rows[g];
            if n_k == 0 {
                return None;
            }
            let nk = n_k as f64;
            let pi = sum_y[g] / nk;
            let fn_ = binary_labels.then(|| sum_fn[g] / nk);
            Some(GroupStats {
                n_k,
                pi,
                p_hat: sum_z[g] / n as f64,
                ell: sum_err[g] / nk,
                fp: binary_labels.then(|| sum_fp[g] / nk),
                fn_,
                fnr: fn_.filter(|_| pi > 0.0).map(|f| f / pi),
            })
        })
        .collect())
}

/// Exact per-group statistics of a binary instance. Empty groups yield `None`.
pub fn exact_group_stats(inst: &Instance) -> Result<Vec<Option<ExactGroupStats>>> {
    let n = inst.len() as u64;
    Ok(inst
        .tally()?
        .iter()
        .map(|t| (t.rows > 0).then(|| t.exact_stats(n)))
        .collect())
}

fn nonempty_tallies(tallies: &[GroupTally]) -> Result<()> {
    match tallies.iter().position(|t| t.rows == 0) {
        Some(k) => Err(Error::EmptyGroup { group: k + 1 }),
        None => Ok(()),
    }
}

/// Exact loss from counts.
pub fn joint_loss_from_tallies(spec: &LossSpec, tallies: &[GroupTally]) -> Result<Exact> {
    nonempty_tallies(tallies)?;
    let n: u64 = tallies.iter().map(|t| t.rows).sum();
    let compiled = spec.compile::<Exact>(tallies.len())?;
    let terms: Vec<GroupTerms<Exact>> = tallies.iter().map(|t| t.terms(n)).collect();
    compiled.evaluate(&terms)
}

/// Exact loss of a binary instance.
pub fn joint_loss_exact(spec: &LossSpec, inst: &Instance) -> Result<Exact> {
    joint_loss_from_tallies(spec, &inst.tally()?)
}

/// Loss from floating-point group statistics (`n` total rows). Only the
/// error-only losses are accepted: profile-based losses need exact counts.
pub fn joint_loss_from_stats(spec: &LossSpec, stats: &[GroupStats], n: usize) -> Result<f64> {
    if !spec.is_error_only() {
        return Err(Error::IncompatibleLoss(format!(
            "`{spec}` needs binary classifications; only balanced, l1 and absgap accept real-valued errors"
        )));
    }
    let compiled = spec.compile::<f64>(stats.len())?;
    let terms: Vec<GroupTerms<f64>> = stats.iter().map(|s| s.terms(n)).collect();
    compiled.evaluate(&terms)
}

/// Joint loss of an instance. Binary instances are evaluated exactly and
/// converted at the end; otherwise `ℓ_k` is the mean absolute error.
pub fn joint_loss(spec: &LossSpec, inst: &Instance) -> Result<f64> {
    if inst.is_binary() {
        return Ok(joint_loss_exact(spec, inst)?.to_f64());
    }
    let stats = group_stats(inst)?;
    let stats: Vec<GroupStats> = stats
        .into_iter()
        .enumerate()
        .map(|(k, s)| s.ok_or(Error::EmptyGroup { group: k + 1 }))
        .collect::<Result<_>>()?;
    joint_loss_from_stats(spec, &stats, inst.len())
}
