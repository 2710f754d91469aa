//! Weighted least squares via the centered normal equations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::WeightedSample;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::LinearModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsqOptions {
    /// Add a tiny ridge term when the Gram matrix is numerically singular.
    pub ridge_fallback: bool,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            ridge_fallback: true,
        }
    }
}

/// What the solver had to do to produce the model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LsqProvenance {
    /// Columns constant over the positively weighted rows. Their weight is 0.
    pub dropped_columns: Vec<usize>,
    /// Ridge added to the diagonal, if the fallback fired.
    pub ridge: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsqFit {
    pub model: LinearModel,
    pub provenance: LsqProvenance,
}

const SINGULAR_RATIO: f64 = 1e-12;
const RIDGE_SCALE: f64 = 1e-10;

/// Minimizes `Σ (w_i/W)(y_i − (w·x_i + b))²`.
///
/// Rows with weight 0 are skipped entirely. Columns that are constant over
/// the remaining rows carry no information once the intercept is free, so
/// they get weight 0 and are listed in the provenance.
pub fn fit_weighted_least_squares(
    ds: &Dataset,
    sample: &WeightedSample,
    opts: &LsqOptions,
) -> Result<LsqFit> {
    sample.check(ds)?;
    let d = ds.d();
    let rows: Vec<(&[f64], f64, f64)> = sample
        .entries
        .iter()
        .filter(|e| e.weight > 0.0)
        .map(|e| (ds.row(e.row), ds.label(e.row), e.weight))
        .collect();
    let total: f64 = rows.iter().map(|r| r.2).sum();

    let first = rows[0].0;
    let keep: Vec<usize> = (0..d)
        .filter(|&j| rows.iter().any(|r| r.0[j] != first[j]))
        .collect();
    let dropped: Vec<usize> = (0..d).filter(|j| !keep.contains(j)).collect();

    let mut x_mean = vec![0.0; keep.len()];
    let mut y_mean = 0.0;
    for (x, y, w) in &rows {
        for (m, &j) in x_mean.iter_mut().zip(&keep) {
            *m += w * x[j];
        }
        y_mean += w * y;
    }
    x_mean.iter_mut().for_each(|m| *m /= total);
    y_mean /= total;

    let p = keep.len();
    let mut provenance = LsqProvenance {
        dropped_columns: dropped,
        ridge: None,
    };
    if p == 0 {
        return Ok(LsqFit {
            model: LinearModel::new(vec![0.0; d], y_mean),
            provenance,
        });
    }

    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    let mut c = vec![0.0; p];
    for (x, y, w) in &rows {
        for (ci, (&j, m)) in c.iter_mut().zip(keep.iter().zip(&x_mean)) {
            *ci = x[j] - m;
        }
        let r = y - y_mean;
        for i in 0..p {
            let wi = w * c[i];
            b[i] += wi * r;
            for k in 0..=i {
                a[(i, k)] += wi * c[k];
            }
        }
    }
    for i in 0..p {
        for k in 0..i {
            a[(k, i)] = a[(i, k)];
        }
    }

    let solve = |m: &DMatrix<f64>| -> Option<DVector<f64>> {
        let chol = m.clone().cholesky()?;
        let max_diag = m.diagonal().max();
        let min_l = chol.l_dirty().diagonal().map(|v| v * v).min();
        if max_diag <= 0.0 || min_l / max_diag < SINGULAR_RATIO {
            return None;
        }
        Some(chol.solve(&b))
    };

    let beta = match solve(&a) {
        Some(beta) => beta,
        None if opts.ridge_fallback => {
            let ridge = RIDGE_SCALE * a.trace() / p as f64;
            let mut reg = a.clone();
            for i in 0..p {
                reg[(i, i)] += ridge;
            }
            provenance.ridge = Some(ridge);
            reg.cholesky()
                .ok_or(Error::RankDeficient { dim: p + 1 })?
                .solve(&b)
        }
        None => return Err(Error::RankDeficient { dim: p + 1 }),
    };

    let mut weights = vec![0.0; d];
    let mut intercept = y_mean;
    for (i, &j) in keep.iter().enumerate() {
        weights[j] = beta[i];
        intercept -= beta[i] * x_mean[i];
    }
    Ok(LsqFit {
        model: LinearModel::new(weights, intercept),
        provenance,
    })
}
