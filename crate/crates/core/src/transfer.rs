//! Transfer by down-weighting out-group rows, its error bound, and θ selection.
//!
//! All logarithms are natural.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::learners::{Learner, WeightedSample};
use crate::model::CandidateClassifier;

/// `{0, 2⁻¹⁰, 2⁻⁹, …, 2⁻¹, 1}`.
pub fn default_theta_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend((1..=10).rev().map(|e| 0.5f64.powi(e)));
    g.push(1.0);
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub theta_grid: Vec<f64>,
    pub inner_folds: usize,
    /// Δ, when known. Only the bound-based choice of θ uses it.
    pub delta_bound: Option<f64>,
    /// δ
    pub confidence: f64,
    /// |C|
    pub class_size: Option<u64>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            theta_grid: default_theta_grid(),
            inner_folds: 5,
            delta_bound: None,
            confidence: 0.05,
            class_size: None,
        }
    }
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.theta_grid.is_empty() {
            return Err(Error::InvalidParameter("theta grid is empty".into()));
        }
        if self.theta_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidParameter(
                "theta grid values must lie in [0,1]".into(),
            ));
        }
        if self.theta_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "theta grid must be sorted and distinct".into(),
            ));
        }
        if self.inner_folds < 2 {
            return Err(Error::InvalidParameter(
                "need at least 2 inner folds".into(),
            ));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence {} outside (0,1)",
                self.confidence
            )));
        }
        if let Some(d) = self.delta_bound {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "delta cap {d} must be a finite value >= 0"
                )));
            }
        }
        if self.class_size == Some(0) {
            return Err(Error::InvalidParameter(
                "class size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Trains on in-group rows at weight 1 and out-group rows at weight `theta`.
/// Binary learners return one candidate per achievable in-group positive
/// count; each candidate records `theta`.
pub fn transfer_fit<L: Learner + ?Sized>(
    ds: &Dataset,
    in_rows: &[usize],
    out_rows: &[usize],
    theta: f64,
    base: &L,
) -> Result<Vec<CandidateClassifier>> {
    if in_rows.is_empty() {
        return Err(Error::InvalidParameter(
            "transfer fit needs in-group rows".into(),
        ));
    }
    let sample = WeightedSample::transfer(in_rows, out_rows, theta)?;
    let mut cands = base.learn(ds, &sample)?;
    for c in &mut cands {
        c.theta = Some(theta);
    }
    Ok(cands)
}

/// Supplies group `k`'s candidates given its rows and everyone else's.
pub trait TransferLearner: Send + Sync {
    fn candidates(
        &self,
        ds: &Dataset,
        group: usize,
        in_rows: &[usize],
        out_rows: &[usize],
    ) -> Result<Vec<CandidateClassifier>>;
}

/// The same θ for every group.
#[derive(Clone, Debug)]
pub struct FixedTheta<L> {
    pub base: L,
    pub theta: f64,
}

impl<L: Learner> TransferLearner for FixedTheta<L> {
    fn candidates(
        &self,
        ds: &Dataset,
        _group: usize,
        in_rows: &[usize],
        out_rows: &[usize],
    ) -> Result<Vec<CandidateClassifier>> {
        transfer_fit(ds, in_rows, out_rows, self.theta, &self.base)
    }
}

/// θ chosen per group by inner cross-validation over the grid.
#[derive(Clone, Debug)]
pub struct CrossValidatedTheta<L> {
    pub base: L,
    pub config: TransferConfig,
    pub seed: u64,
    pub exec: Exec,
}

impl<L: Learner> TransferLearner for CrossValidatedTheta<L> {
    fn candidates(
        &self,
        ds: &Dataset,
        group: usize,
        in_rows: &[usize],
        out_rows: &[usize],
    ) -> Result<Vec<CandidateClassifier>> {
        let cv = select_theta_cv(
            ds,
            in_rows,
            out_rows,
            &self.config,
            &self.base,
            group_seed(self.seed, group),
            self.exec,
        )?;
        transfer_fit(ds, in_rows, out_rows, cv.theta, &self.base)
    }
}

/// Per-group seed derived from a master seed.
pub fn group_seed(seed: u64, group: usize) -> u64 {
    seed ^ (group as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub theta: f64,
    /// Mean validation loss per grid value.
    pub mean_losses: Vec<f64>,
    /// Base-learner calls made.
    pub fits: u64,
}

/// Splits `rows` into `folds` blocks after a seeded shuffle.
pub fn fold_blocks(rows: &[usize], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut shuffled = rows.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = shuffled.len();
    (0..folds)
        .map(|f| shuffled[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect()
}

/// Validation loss of a trained candidate set on in-group rows. Regression
/// uses the single fitted model's squared error. Binary uses the 0-1 error of
/// the candidate with least training error (ties to fewer positives).
fn validation_loss(ds: &Dataset, cands: &[CandidateClassifier], rows: &[usize]) -> f64 {
    let Some(best) = cands.iter().min_by(|a, b| {
        a.weighted_error
            .total_cmp(&b.weighted_error)
            .then(a.positives.cmp(&b.positives))
    }) else {
        return f64::INFINITY;
    };
    let total: f64 = rows
        .iter()
        .map(|&i| {
            let r = ds.label(i) - best.predictor.predict(ds.row(i));
            match ds.mode() {
                Mode::Binary => r.abs(),
                Mode::Regression => r * r,
            }
        })
        .sum();
    total / rows.len() as f64
}

/// Picks θ from the grid by `inner_folds`-fold cross-validation. Folds split
/// the in-group rows only; every fold trains on all out-group rows. Ties go
/// to the smaller θ.
pub fn select_theta_cv<L: Learner + ?Sized>(
    ds: &Dataset,
    in_rows: &[usize],
    out_rows: &[usize],
    cfg: &TransferConfig,
    base: &L,
    seed: u64,
    exec: Exec,
) -> Result<CvOutcome> {
    cfg.validate()?;
    if in_rows.len() < cfg.inner_folds {
        return Err(Error::InvalidParameter(format!(
            "group has {} rows, fewer than {} folds",
            in_rows.len(),
            cfg.inner_folds
        )));
    }
    let grid = &cfg.theta_grid;
    if grid.len() == 1 {
        return Ok(CvOutcome {
            theta: grid[0],
            mean_losses: vec![f64::NAN],
            fits: 0,
        });
    }
    let folds = fold_blocks(in_rows, cfg.inner_folds, seed);
    let trains: Vec<Vec<usize>> = (0..folds.len())
        .map(|f| {
            let mut t: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, b)| b.iter().copied())
                .collect();
            t.sort_unstable();
            t
        })
        .collect();
    let nf = folds.len();
    let losses = exec::map_range(exec, 0..grid.len() * nf, |job| -> Result<f64> {
        let (ti, f) = (job / nf, job % nf);
        let cands = transfer_fit(ds, &trains[f], out_rows, grid[ti], base)?;
        Ok(validation_loss(ds, &cands, &folds[f]))
    });
    let losses = losses.into_iter().collect::<Result<Vec<f64>>>()?;
    let mean_losses: Vec<f64> = losses
        .chunks(nf)
        .map(|c| c.iter().sum::<f64>() / nf as f64)
        .collect();
    let mut best = 0;
    for (i, &m) in mean_losses.iter().enumerate() {
        if m < mean_losses[best] {
            best = i;
        }
    }
    Ok(CvOutcome {
        theta: grid[best],
        mean_losses,
        fits: (grid.len() * nf) as u64,
    })
}

/// Inputs to the single-group error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n_k: u64,
    pub n_minus_k: u64,
    /// Δ
    pub delta_cap: f64,
    /// δ
    pub confidence: f64,
    /// |C|
    pub class_size: u64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n_k == 0 {
            return Err(Error::InvalidParameter("n_k must be at least 1".into()));
        }
        if !(self.delta_cap >= 0.0 && self.delta_cap.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta cap {} must be >= 0",
                self.delta_cap
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence {} outside (0,1)",
                self.confidence
            )));
        }
        if self.class_size == 0 {
            return Err(Error::InvalidParameter(
                "class size must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// `ln(2|C|/δ)`
    fn log_term(&self) -> f64 {
        (2.0 * self.class_size as f64 / self.confidence).ln()
    }

    /// `r = √((2/n_k) ln(2|C|/δ))`, the bound at θ = 0.
    pub fn r(&self) -> f64 {
        (2.0 / self.n_k as f64 * self.log_term()).sqrt()
    }

    /// `n₋k / n_k`
    pub fn ratio(&self) -> f64 {
        self.n_minus_k as f64 / self.n_k as f64
    }
}

/// `(√(2(n_k + θ²n₋k) ln(2|C|/δ)) + θ n₋k Δ) / (n_k + θ n₋k)`.
pub fn f_bound(theta: f64, b: &BoundInputs) -> f64 {
    let (nk, nm) = (b.n_k as f64, b.n_minus_k as f64);
    ((2.0 * (nk + theta * theta * nm) * b.log_term()).sqrt() + theta * nm * b.delta_cap)
        / (nk + theta * nm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `Δ ≥ r`: the bound only grows with θ.
    BoundaryZero,
    Interior,
}

/// The printed closed form `√(β²/4 + (n₋k/n_k)(1−β)) − β/2` under two
/// readings of β.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    /// `β = Δ²·(2/n_k)·ln(2|C|/δ)`, as printed.
    pub printed: f64,
    /// `β = Δ² / ((2/n_k)·ln(2|C|/δ))`.
    pub rescaled: f64,
    pub printed_agrees: bool,
    pub rescaled_agrees: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaStar {
    pub theta: f64,
    pub f_value: f64,
    pub branch: Branch,
    pub r: f64,
    /// Root of `(r² − Δ²m)θ² − 2r²θ + (r² − Δ²) = 0` in `[0,1]`, the squared
    /// stationarity condition. `None` on the boundary branch.
    pub quadratic_root: Option<f64>,
    /// Present on the interior branch.
    pub closed_form: Option<ClosedForm>,
}

const THETA_TOL: f64 = 1e-9;
const CLOSED_FORM_TOL: f64 = 1e-6;

/// Minimizer of [`f_bound`] over `θ ∈ [0,1]`.
///
/// With `r = √((2/n_k) ln(2|C|/δ))` and `m = n₋k/n_k`, the derivative of the
/// bound has the sign of `Δ − r(1−θ)/√(1+θ²m)`. The subtracted term falls
/// from `r` at θ = 0 to 0 at θ = 1, so the minimum is at 0 when `Δ ≥ r` and
/// otherwise at the unique root, found by bisection.
pub fn theta_star(b: &BoundInputs) -> Result<ThetaStar> {
    b.validate()?;
    let r = b.r();
    let m = b.ratio();
    let delta = b.delta_cap;
    if b.n_minus_k == 0 || delta >= r {
        return Ok(ThetaStar {
            theta: 0.0,
            f_value: f_bound(0.0, b),
            branch: Branch::BoundaryZero,
            r,
            quadratic_root: None,
            closed_form: None,
        });
    }
    let phi = |t: f64| r * (1.0 - t) / (1.0 + t * t * m).sqrt() - delta;
    let theta = if delta == 0.0 {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > THETA_TOL / 4.0 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let quadratic_root = {
        let (a, bq, c) = (
            r * r - delta * delta * m,
            -2.0 * r * r,
            r * r - delta * delta,
        );
        if a.abs() < 1e-300 {
            Some(-c / bq)
        } else {
            let disc = (bq * bq - 4.0 * a * c).max(0.0).sqrt();
            // Stable form of the smaller root.
            let q = -0.5 * (bq - disc);
            [q / a, c / q]
                .into_iter()
                .filter(|t| (-1e-12..=1.0 + 1e-12).contains(t))
                .min_by(|x, y| (x - theta).abs().total_cmp(&(y - theta).abs()))
        }
    };
    let closed = |beta: f64| (beta * beta / 4.0 + m * (1.0 - beta)).sqrt() - beta / 2.0;
    let printed = closed(delta * delta * r * r);
    let rescaled = closed(delta * delta / (r * r));
    Ok(ThetaStar {
        theta,
        f_value: f_bound(theta, b),
        branch: Branch::Interior,
        r,
        quadratic_root,
        closed_form: Some(ClosedForm {
            printed,
            rescaled,
            printed_agrees: (printed - theta).abs() <= CLOSED_FORM_TOL,
            rescaled_agrees: (rescaled - theta).abs() <= CLOSED_FORM_TOL,
        }),
    })
}

/// Excess-loss bound `5RKτ + R Σ_k min(τ √(1/(ν_k − τ)), Δ)` with
/// `τ = √((2/n) ln(8|C|(n+K)/δ))`. A group with `ν_k ≤ τ` contributes `Δ`.
/// Returns `+∞` when `τ ≥ 1`.
pub fn generalization_bound(
    nu: &[f64],
    r_cont: f64,
    n: u64,
    class_size: u64,
    confidence: f64,
    delta_cap: f64,
) -> Result<f64> {
    let k = nu.len();
    if k == 0 || nu.iter().any(|&v| !(v >= 0.0)) || (nu.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(
            "group frequencies must be >= 0 and sum to 1".into(),
        ));
    }
    if !(r_cont >= 0.0) || !(delta_cap >= 0.0) || n == 0 || class_size == 0 {
        return Err(Error::InvalidParameter(
            "R, Δ must be >= 0 and n, |C| >= 1".into(),
        ));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence {confidence} outside (0,1)"
        )));
    }
    let nf = n as f64;
    let tau = (2.0 / nf * (8.0 * class_size as f64 * (nf + k as f64) / confidence).ln()).sqrt();
    if tau >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let per_group: f64 = nu
        .iter()
        .map(|&v| {
            if v <= tau {
                delta_cap
            } else {
                (tau * (1.0 / (v - tau)).sqrt()).min(delta_cap)
            }
        })
        .sum();
    Ok(5.0 * r_cont * k as f64 * tau + r_cont * per_group)
}
