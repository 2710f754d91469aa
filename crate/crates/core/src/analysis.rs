//! Coupled-vs-decoupled fixtures and exact gap measurement.
//!
//! Every fixture is a finite dataset with uniform row weights. Each one keeps
//! the group-defining bit as a feature column, so exporting features and
//! labels is enough to recover the groups downstream.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{format_float, ColumnKind, ColumnMeta, Dataset, Mode};
use crate::decouple::{decouple_with, DecoupleConfig};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::learners::{
    fit_weighted_least_squares, Exhaustive, FiniteClass, LeastSquares, LsqOptions, WeightedSample,
    DEFAULT_BUDGET,
};
use crate::losses::{
    group_stats_with, joint_loss_exact, joint_loss_from_stats, ErrorMetric, Instance, LossSpec,
    Scalar,
};
use crate::model::{LinearModel, Predictor};

/// Largest dimension for which the parity cube is enumerated.
pub const MAX_ENUMERATED_DIM: usize = 12;
/// Rows drawn when the parity cube is sampled instead.
pub const PARITY_SAMPLE_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub dataset: Dataset,
    pub description: String,
    pub expected_coupled_loss: Option<f64>,
    pub expected_decoupled_loss: Option<f64>,
}

impl Fixture {
    /// Writes features and `label` as CSV in the pipeline's input format.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let ds = &self.dataset;
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = ds.columns().iter().map(|c| c.name.as_str()).collect();
        header.push("label");
        w.write_record(&header)?;
        for i in 0..ds.n() {
            let mut rec: Vec<String> = ds.row(i).iter().map(|v| format_float(*v)).collect();
            rec.push(format_float(ds.label(i)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows as planar points, when the dataset has two columns.
    pub fn points_2d(&self) -> Option<Vec<[f64; 2]>> {
        (self.dataset.d() == 2).then(|| self.dataset.rows().iter().map(|r| [r[0], r[1]]).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityTarget {
    /// Real-valued labels, squared error.
    Regression,
    /// 0-1 labels for halfspace classifiers.
    Separator,
}

fn bit_columns(d: usize) -> Vec<ColumnMeta> {
    (1..=d)
        .map(|j| ColumnMeta {
            name: format!("x{j}"),
            kind: ColumnKind::Binary,
        })
        .collect()
}

fn bit_rows(d: usize, seed: u64) -> Vec<Vec<f64>> {
    let bits = |v: u64| {
        (0..d)
            .map(|j| ((v >> (d - 1 - j)) & 1) as f64)
            .collect::<Vec<f64>>()
    };
    if d <= MAX_ENUMERATED_DIM {
        (0..1u64 << d).map(bits).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..PARITY_SAMPLE_ROWS)
            .map(|_| {
                (0..d)
                    .map(|_| f64::from(u8::from(rng.random::<bool>())))
                    .collect()
            })
            .collect()
    }
}

/// Uniform rows over `{0,1}^d` labeled `x_{d−1} XOR x_d`, grouped by `x_d`
/// (`x_d = 0` is group 1). The cube is enumerated for `d ≤ 12` and sampled
/// with `seed` above that; expectations are only attached when enumerated.
pub fn make_parity_fixture(d: usize, target: ParityTarget, seed: u64) -> Result<Fixture> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "parity fixture needs d >= 2, got {d}"
        )));
    }
    let rows = bit_rows(d, seed);
    let labels: Vec<f64> = rows
        .iter()
        .map(|r| f64::from(u8::from(r[d - 2] != r[d - 1])))
        .collect();
    let groups: Vec<usize> = rows.iter().map(|r| r[d - 1] as usize + 1).collect();
    let mode = match target {
        ParityTarget::Regression => Mode::Regression,
        ParityTarget::Separator => Mode::Binary,
    };
    let dataset = Dataset::new(rows, labels, groups, 2, mode, Some(bit_columns(d)))?;
    let exact = d <= MAX_ENUMERATED_DIM;
    Ok(Fixture {
        dataset,
        description: format!("parity of the last two of {d} bits, grouped by the last bit"),
        expected_coupled_loss: exact.then_some(0.25),
        expected_decoupled_loss: exact.then_some(0.0),
    })
}

/// Parity of all `s + 1` bits, grouped by the last. A depth-`s` tree fits
/// each group but a single tree needs depth `s + 1`. No tree learner consumes
/// this yet.
pub fn make_tree_parity_fixture(s: usize) -> Result<Fixture> {
    let d = s + 1;
    if s == 0 || d > MAX_ENUMERATED_DIM {
        return Err(Error::InvalidParameter(format!(
            "tree parity needs 1 <= s <= {}",
            MAX_ENUMERATED_DIM - 1
        )));
    }
    let rows = bit_rows(d, 0);
    let labels: Vec<f64> = rows
        .iter()
        .map(|r| f64::from(u8::from(r.iter().filter(|&&b| b == 1.0).count() % 2 == 1)))
        .collect();
    let groups: Vec<usize> = rows.iter().map(|r| r[d - 1] as usize + 1).collect();
    Ok(Fixture {
        dataset: Dataset::new(rows, labels, groups, 2, Mode::Binary, Some(bit_columns(d)))?,
        description: format!("parity of {d} bits, grouped by the last bit"),
        expected_coupled_loss: None,
        expected_decoupled_loss: None,
    })
}

fn symmetric_offsets(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u: f64 = rng.random_range(0.05..1.0);
        out.push(u);
        if out.len() < n {
            out.push(-u);
        }
    }
    out
}

/// Two groups on a line, distinguished by `x2 ∈ {1, 2}`. Group 1 is labeled
/// `x1 > 0` and group 2 the opposite. `x1` values come in mirrored pairs
/// `±u`, so with even counts each group is exactly half positive.
pub fn make_figure1_fixture(n_major: usize, n_minor: usize, seed: u64) -> Result<Fixture> {
    if n_major < 2 || n_minor < 2 {
        return Err(Error::InvalidParameter(
            "flipped-minority fixture needs at least 2 rows per group".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_major + n_minor);
    let mut labels = Vec::with_capacity(rows.capacity());
    let mut groups = Vec::with_capacity(rows.capacity());
    for (g, count) in [(1usize, n_major), (2, n_minor)] {
        for x1 in symmetric_offsets(count, &mut rng) {
            let pos = x1 > 0.0;
            rows.push(vec![x1, g as f64]);
            labels.push(f64::from(u8::from(if g == 1 { pos } else { !pos })));
            groups.push(g);
        }
    }
    let columns = vec![
        ColumnMeta::numeric("x1"),
        ColumnMeta {
            name: "x2".into(),
            kind: ColumnKind::Binary,
        },
    ];
    let even = n_major % 2 == 0 && n_minor % 2 == 0;
    let n = (n_major + n_minor) as f64;
    Ok(Fixture {
        dataset: Dataset::new(rows, labels, groups, 2, Mode::Binary, Some(columns))?,
        description: format!("minority group with flipped labels ({n_major}/{n_minor})"),
        expected_coupled_loss: even.then(|| (n_major.min(n_minor) / 2) as f64 / n),
        expected_decoupled_loss: Some(0.0),
    })
}

/// Both groups share `y = 0.5 + 0.1(x1 + x2 − x3) + N(0, σ²)`, clamped to
/// `[0,1]`, with `x ~ U[0,1]³`. Column `s` is 0 for group 1 and 1 for group 2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdenticalGroups {
    pub noise_sd: f64,
}

impl IdenticalGroups {
    pub fn true_model() -> LinearModel {
        LinearModel::new(vec![0.1, 0.1, -0.1, 0.0], 0.5)
    }

    fn draw(&self, group: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
        let noise = Normal::new(0.0, self.noise_sd)
            .map_err(|e| Error::InvalidParameter(format!("noise sd {}: {e}", self.noise_sd)))?;
        let mut x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        x.push((group - 1) as f64);
        let y = (Self::true_model().predict(&x) + noise.sample(rng)).clamp(0.0, 1.0);
        Ok((x, y))
    }

    /// `n_major` rows of group 1 followed by `n_minor` rows of group 2.
    pub fn generate(&self, n_major: usize, n_minor: usize, seed: u64) -> Result<Fixture> {
        if n_major == 0 || n_minor == 0 {
            return Err(Error::InvalidParameter("both groups need rows".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n_major + n_minor);
        let mut labels = Vec::with_capacity(rows.capacity());
        let mut groups = Vec::with_capacity(rows.capacity());
        for (g, count) in [(1, n_major), (2, n_minor)] {
            for _ in 0..count {
                let (x, y) = self.draw(g, &mut rng)?;
                rows.push(x);
                labels.push(y);
                groups.push(g);
            }
        }
        let mut columns: Vec<ColumnMeta> = (1..=3)
            .map(|j| ColumnMeta::numeric(format!("x{j}")))
            .collect();
        columns.push(ColumnMeta {
            name: "s".into(),
            kind: ColumnKind::Binary,
        });
        Ok(Fixture {
            dataset: Dataset::new(rows, labels, groups, 2, Mode::Regression, Some(columns))?,
            description: format!(
                "identical groups ({n_major}/{n_minor}), noise sd {}",
                self.noise_sd
            ),
            expected_coupled_loss: None,
            expected_decoupled_loss: None,
        })
    }

    /// Fresh rows of one group, for estimating true error.
    pub fn sample_group(&self, group: usize, n: usize, seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.draw(group, &mut rng)).collect()
    }
}

/// Classifier class for [`empirical_coupling_gap`].
#[derive(Clone, Debug)]
pub enum CouplingClass {
    /// Linear regression, solved in closed form. Regression fixtures only.
    LeastSquares,
    /// An explicit finite class, solved by enumeration. Binary fixtures only.
    Finite(FiniteClass),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingGap {
    pub coupled_min: f64,
    pub decoupled_min: f64,
    pub gap: f64,
}

pub fn empirical_coupling_gap(
    fixture: &Fixture,
    class: &CouplingClass,
    loss: &LossSpec,
) -> Result<CouplingGap> {
    empirical_coupling_gap_with(fixture, class, loss, DEFAULT_BUDGET, Exec::default())
}

/// Exact minimum of `loss` over single classifiers and over per-group
/// combinations. `budget` caps `|C| · n` for finite classes.
pub fn empirical_coupling_gap_with(
    fixture: &Fixture,
    class: &CouplingClass,
    loss: &LossSpec,
    budget: u64,
    exec: Exec,
) -> Result<CouplingGap> {
    let ds = &fixture.dataset;
    ds.ensure_valid()?;
    let cfg = DecoupleConfig::default();
    let (coupled_min, decoupled_min) = match class {
        CouplingClass::LeastSquares => {
            if ds.mode() != Mode::Regression {
                return Err(Error::IncompatibleLoss(
                    "least-squares coupling needs a regression fixture".into(),
                ));
            }
            let all: Vec<usize> = (0..ds.n()).collect();
            let fit = fit_weighted_least_squares(
                ds,
                &WeightedSample::uniform(&all),
                &LsqOptions::default(),
            )?;
            let preds: Vec<f64> = all.iter().map(|&i| fit.model.predict(ds.row(i))).collect();
            let inst = Instance::new(
                ds.num_groups(),
                ds.groups().to_vec(),
                ds.labels().to_vec(),
                preds,
            )?;
            let stats: Vec<_> = group_stats_with(&inst, ErrorMetric::Squared)?
                .into_iter()
                .flatten()
                .collect();
            let coupled = joint_loss_from_stats(loss, &stats, ds.n())?;
            let decoupled = decouple_with(&LeastSquares::default(), loss, ds, &cfg)?
                .classifier
                .achieved_loss;
            (coupled, decoupled)
        }
        CouplingClass::Finite(fc) => {
            if ds.mode() != Mode::Binary {
                return Err(Error::IncompatibleLoss(
                    "finite-class coupling needs a binary fixture".into(),
                ));
            }
            if !loss.is_monotonic() {
                return Err(Error::IncompatibleLoss(format!(
                    "`{loss}` is not monotonic; per-group search is not exact for it"
                )));
            }
            let required = (fc.len() as u64).saturating_mul(ds.n() as u64);
            if required > budget {
                return Err(Error::BudgetExceeded { required, budget });
            }
            let coupled = coupled_minimum(fc.classifiers(), ds, loss, exec)?;
            let learner = Exhaustive {
                class: fc.clone(),
                budget,
                exec,
            };
            let decoupled = decouple_with(&learner, loss, ds, &cfg)?
                .classifier
                .achieved_loss;
            (coupled, decoupled)
        }
    };
    Ok(CouplingGap {
        coupled_min,
        decoupled_min,
        gap: coupled_min - decoupled_min,
    })
}

fn coupled_minimum(class: &[Predictor], ds: &Dataset, loss: &LossSpec, exec: Exec) -> Result<f64> {
    let losses = exec::map_slice(exec, class, |c| -> Result<f64> {
        let preds: Vec<f64> = ds.rows().iter().map(|x| c.predict(x)).collect();
        let inst = Instance::new(
            ds.num_groups(),
            ds.groups().to_vec(),
            ds.labels().to_vec(),
            preds,
        )?;
        Ok(joint_loss_exact(loss, &inst)?.to_f64())
    });
    let mut best = f64::INFINITY;
    for l in losses {
        best = best.min(l?);
    }
    Ok(best)
}

/// Per-group 0-1 error of `c` on `ds`, groups in order.
pub fn group_errors(c: &Predictor, ds: &Dataset) -> Vec<f64> {
    let mut wrong = vec![0usize; ds.num_groups()];
    let counts = ds.group_counts();
    for i in 0..ds.n() {
        if c.predict(ds.row(i)) != ds.label(i) {
            wrong[ds.group(i) - 1] += 1;
        }
    }
    wrong
        .iter()
        .zip(&counts)
        .map(|(&w, &n)| w as f64 / n as f64)
        .collect()
}
