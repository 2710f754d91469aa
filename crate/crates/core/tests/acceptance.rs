//! Acceptance checks. Prints one PASS/FAIL line per check and exits non-zero
//! if any check fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fairsplit_core::analysis::{
    empirical_coupling_gap, group_errors, make_figure1_fixture, make_parity_fixture, CouplingClass,
    IdenticalGroups, ParityTarget,
};
use fairsplit_core::decouple::{decouple_with, DecoupleConfig};
use fairsplit_core::learners::{
    enumerate_linear_separators_2d, enumerate_linear_separators_2d_capped, exhaustive_learn,
    sweep_thresholds, Exhaustive, FiniteClass, LeastSquares, ThresholdStumps, WeightedSample,
    DEFAULT_BUDGET,
};
use fairsplit_core::losses::{
    exact_group_stats, find_monotonicity_counterexample_with, joint_loss_exact, Exact, Instance,
    Scalar, SearchOptions,
};
use fairsplit_core::model::LinearModel;
use fairsplit_core::pipeline::{
    emit_report, ingest_csv, outer_folds, run_experiment, run_selected, select_sensitive_attribute,
    selection_options, Baseline, ExperimentConfig,
};
use fairsplit_core::transfer::{
    f_bound, select_theta_cv, theta_star, transfer_fit, BoundInputs, Branch, TransferConfig,
};
use fairsplit_core::{Dataset, Exec, LossSpec, Mode, Predictor};

type Check = Result<String, String>;
type CheckFn = fn() -> Check;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn coupling_cost_on_parity() -> Check {
    let start = Instant::now();
    let reg = make_parity_fixture(2, ParityTarget::Regression, 0).map_err(e)?;
    let ls =
        empirical_coupling_gap(&reg, &CouplingClass::LeastSquares, &LossSpec::L1).map_err(e)?;
    ensure((ls.coupled_min - 0.25).abs() <= 1e-9, || {
        format!("coupled MSE {}", ls.coupled_min)
    })?;
    ensure(ls.decoupled_min.abs() <= 1e-9, || {
        format!("decoupled MSE {}", ls.decoupled_min)
    })?;

    let sep = make_parity_fixture(2, ParityTarget::Separator, 0).map_err(e)?;
    let points = sep.points_2d().ok_or("parity fixture is not planar")?;
    let class = enumerate_linear_separators_2d(&points).map_err(e)?;
    let g =
        empirical_coupling_gap(&sep, &CouplingClass::Finite(class), &LossSpec::L1).map_err(e)?;
    ensure(g.coupled_min >= 0.25, || {
        format!("coupled 0-1 loss {}", g.coupled_min)
    })?;
    ensure(g.decoupled_min == 0.0, || {
        format!("decoupled 0-1 loss {}", g.decoupled_min)
    })?;
    within(Duration::from_secs(1), start)?;
    Ok(format!(
        "least squares {} vs {:.1e}, separators {} vs {}",
        ls.coupled_min, ls.decoupled_min, g.coupled_min, g.decoupled_min
    ))
}

fn flipped_minority() -> Check {
    let start = Instant::now();
    let fx = make_figure1_fixture(200, 20, 1).map_err(e)?;
    let ds = &fx.dataset;
    let points = fx.points_2d().ok_or("fixture is not planar")?;
    let class = enumerate_linear_separators_2d_capped(&points, points.len()).map_err(e)?;
    let mut best_min_acc = 0.0f64;
    for c in class.classifiers() {
        let err = group_errors(c, ds);
        let min_acc = (1.0 - err[0]).min(1.0 - err[1]);
        best_min_acc = best_min_acc.max(min_acc);
    }
    ensure(best_min_acc <= 0.5, || {
        format!("a single separator reaches {best_min_acc} on both groups")
    })?;

    let dc = decouple_with(
        &ThresholdStumps,
        &LossSpec::L1,
        ds,
        &DecoupleConfig::default(),
    )
    .map_err(e)?;
    for k in 1..=2 {
        ensure(
            matches!(dc.classifier.per_group[k - 1], Predictor::Threshold { .. }),
            || format!("group {k} classifier is not a threshold"),
        )?;
    }
    let wrong = (0..ds.n())
        .filter(|&i| dc.classifier.per_group[ds.group(i) - 1].predict(ds.row(i)) != ds.label(i))
        .count();
    ensure(wrong == 0, || {
        format!("decoupled pair misclassifies {wrong} rows")
    })?;
    within(Duration::from_secs(5), start)?;
    Ok(format!(
        "{} separators, best joint accuracy {best_min_acc:.3}, decoupled pair exact",
        class.len()
    ))
}

fn random_table_class(n: usize, m: usize, rng: &mut ChaCha8Rng) -> FiniteClass {
    let members = (0..m)
        .map(|_| Predictor::Table {
            entries: (0..n)
                .map(|i| (vec![i as f64], f64::from(u8::from(rng.random::<bool>()))))
                .collect(),
            default: 0.0,
        })
        .collect();
    FiniteClass::new(members).expect("nonempty class")
}

fn random_binary_dataset(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let groups: Vec<usize> = (0..n)
        .map(|i| {
            if i < k {
                i + 1
            } else {
                rng.random_range(1..=k)
            }
        })
        .collect();
    let labels: Vec<f64> = (0..n)
        .map(|_| f64::from(u8::from(rng.random::<bool>())))
        .collect();
    let rows = (0..n).map(|i| vec![i as f64]).collect();
    Dataset::new(rows, labels, groups, k, Mode::Binary, None).expect("valid dataset")
}

fn predictions(class: &FiniteClass, ds: &Dataset, idx: &[usize]) -> Vec<f64> {
    (0..ds.n())
        .map(|i| class.classifiers()[idx[ds.group(i) - 1]].predict(ds.row(i)))
        .collect()
}

fn brute_force_minimum(
    class: &FiniteClass,
    ds: &Dataset,
    spec: &LossSpec,
) -> Result<Exact, String> {
    let (k, m) = (ds.num_groups(), class.len());
    let mut best: Option<Exact> = None;
    for code in 0..m.pow(k as u32) {
        let idx: Vec<usize> = (0..k).map(|g| code / m.pow(g as u32) % m).collect();
        let inst = Instance::new(
            k,
            ds.groups().to_vec(),
            ds.labels().to_vec(),
            predictions(class, ds, &idx),
        )
        .map_err(e)?;
        let l = joint_loss_exact(spec, &inst).map_err(e)?;
        if best.is_none_or(|b| l < b) {
            best = Some(l);
        }
    }
    Ok(best.expect("nonempty product"))
}

fn monotone_loss(
    i: usize,
    k: usize,
    class: &FiniteClass,
    ds: &Dataset,
    rng: &mut ChaCha8Rng,
) -> LossSpec {
    let lambda = rng.random_range(0..=20) as f64 / 20.0;
    match i % 8 {
        0 => LossSpec::Balanced,
        1 => LossSpec::L1,
        2 => LossSpec::StrictNumericalParity,
        3 => LossSpec::NumericalParity { lambda },
        4 => LossSpec::StrictDemographicParity,
        5 => LossSpec::DemographicParity { lambda },
        6 => {
            // A profile some product member reaches, so the target is achievable.
            let idx: Vec<usize> = (0..k).map(|_| rng.random_range(0..class.len())).collect();
            let z = predictions(class, ds, &idx);
            let target = (1..=k)
                .map(|g| {
                    let p = (0..ds.n())
                        .filter(|&i| ds.group(i) == g && z[i] == 1.0)
                        .count();
                    p as f64 / ds.n() as f64
                })
                .collect();
            LossSpec::FixedProfile { target }
        }
        _ if k == 2 => LossSpec::AbsGap {
            lambda: rng.random_range(0..=10) as f64 / 20.0,
        },
        _ => LossSpec::NumericalParity { lambda },
    }
}

fn decouple_matches_brute_force() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = DecoupleConfig::default();
    for i in 0..500 {
        let k = rng.random_range(1..=3);
        let n = rng.random_range(k.max(2)..=12);
        let m = rng.random_range(2..=6);
        let ds = random_binary_dataset(n, k, &mut rng);
        let class = random_table_class(n, m, &mut rng);
        let spec = monotone_loss(i, k, &class, &ds, &mut rng);
        let learner = Exhaustive {
            class: class.clone(),
            budget: DEFAULT_BUDGET,
            exec: Exec::Sequential,
        };
        let got = decouple_with(&learner, &spec, &ds, &cfg).map_err(e)?;
        let want = brute_force_minimum(&class, &ds, &spec)?;
        let inst = Instance::new(k, ds.groups().to_vec(), ds.labels().to_vec(), {
            let preds: Vec<f64> = (0..n)
                .map(|r| got.classifier.per_group[ds.group(r) - 1].predict(ds.row(r)))
                .collect();
            preds
        })
        .map_err(e)?;
        let achieved = joint_loss_exact(&spec, &inst).map_err(e)?;
        ensure(achieved == want, || {
            format!(
                "instance {i} ({spec}, n={n}, K={k}): decouple {achieved} vs brute force {want}"
            )
        })?;
        ensure(got.classifier.achieved_loss == want.to_f64(), || {
            format!(
                "instance {i}: reported loss {} vs {}",
                got.classifier.achieved_loss, want
            )
        })?;
    }
    within(Duration::from_secs(120), start)?;
    Ok("500 instances, exact rational equality".into())
}

fn monotonicity_boundary() -> Check {
    let start = Instant::now();
    let mut clean = vec![
        LossSpec::Balanced,
        LossSpec::L1,
        LossSpec::StrictNumericalParity,
        LossSpec::StrictDemographicParity,
    ];
    for lambda in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
        clean.push(LossSpec::NumericalParity { lambda });
        clean.push(LossSpec::DemographicParity { lambda });
    }
    for target in [
        [0.0, 0.0],
        [0.125, 0.25],
        [0.25, 0.25],
        [0.5, 0.5],
        [1.0 / 3.0, 1.0 / 6.0],
    ] {
        clean.push(LossSpec::FixedProfile {
            target: target.to_vec(),
        });
    }
    for lambda in [0.0, 0.25, 0.5] {
        clean.push(LossSpec::AbsGap { lambda });
    }
    let dirty = [
        LossSpec::AbsGap { lambda: 0.6 },
        LossSpec::AbsGap { lambda: 0.75 },
        LossSpec::AbsGap { lambda: 1.0 },
        LossSpec::FnrParity { lambda: 0.5 },
    ];
    let opts = SearchOptions::new(2, 8, u64::MAX, 0);
    for spec in &clean {
        let r = find_monotonicity_counterexample_with(spec, &opts).map_err(e)?;
        ensure(r.complete, || format!("{spec}: search incomplete"))?;
        if let Some(w) = r.witness {
            return Err(format!("{spec}: unexpected witness {w:?}"));
        }
    }
    for spec in &dirty {
        let r = find_monotonicity_counterexample_with(spec, &opts).map_err(e)?;
        ensure(r.witness.is_some(), || format!("{spec}: no witness found"))?;
    }
    within(Duration::from_secs(60), start)?;
    Ok(format!(
        "{} losses clean, {} with witnesses",
        clean.len(),
        dirty.len()
    ))
}

fn error_decomposition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in 0..10_000 {
        let k = rng.random_range(1..=4);
        let n = rng.random_range(1..=40);
        let groups: Vec<usize> = (0..n).map(|_| rng.random_range(1..=k)).collect();
        let bit = |rng: &mut ChaCha8Rng| f64::from(u8::from(rng.random::<bool>()));
        let labels: Vec<f64> = (0..n).map(|_| bit(&mut rng)).collect();
        let preds: Vec<f64> = (0..n).map(|_| bit(&mut rng)).collect();
        let inst = Instance::new(k, groups.clone(), labels.clone(), preds.clone()).map_err(e)?;
        let stats = exact_group_stats(&inst).map_err(e)?;
        for (g, s) in stats.iter().enumerate() {
            let Some(s) = s else { continue };
            let rows: Vec<usize> = (0..n).filter(|&i| groups[i] == g + 1).collect();
            let nk = rows.len() as i128;
            let count = |f: &dyn Fn(usize) -> bool| {
                Exact::new(rows.iter().filter(|&&i| f(i)).count() as i128, nk)
            };
            let fp = count(&|i| preds[i] == 1.0 && labels[i] == 0.0);
            let fn_ = count(&|i| preds[i] == 0.0 && labels[i] == 1.0);
            let rate = s.p_hat * Exact::new(n as i128, nk);
            let two = Exact::from_integer(2);
            ensure(s.fp == fp && s.fn_ == fn_, || {
                format!("instance {t}: counts disagree")
            })?;
            ensure(fp == (s.ell + rate - s.pi) / two, || {
                format!("instance {t}, group {}: FP identity", g + 1)
            })?;
            ensure(fn_ == (s.ell + s.pi - rate) / two, || {
                format!("instance {t}, group {}: FN identity", g + 1)
            })?;
        }
    }
    Ok("10000 instances, exact".into())
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn theta_star_minimizes() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut skipped = 0;
    let mut interior = 0;
    for t in 0..1000 {
        let b = BoundInputs {
            n_k: log_uniform(&mut rng, 1.0, 1e4) as u64,
            n_minus_k: log_uniform(&mut rng, 1.0, 1e5) as u64,
            delta_cap: if t % 10 == 0 {
                0.0
            } else {
                rng.random_range(0.0..1.0)
            },
            confidence: rng.random_range(0.001..0.5),
            class_size: log_uniform(&mut rng, 1.0, 1e6) as u64,
        };
        let s = theta_star(&b).map_err(e)?;
        for i in 0..10_000 {
            let theta = i as f64 / 9999.0;
            let f = f_bound(theta, &b);
            ensure(s.f_value <= f * (1.0 + 1e-12), || {
                format!(
                    "{b:?}: f(θ*={}) = {} above f({theta}) = {f}",
                    s.theta, s.f_value
                )
            })?;
        }
        let threshold =
            2.0 / (b.delta_cap * b.delta_cap) * (2.0 * b.class_size as f64 / b.confidence).ln();
        let n_k = b.n_k as f64;
        if threshold.is_finite() && (n_k - threshold).abs() <= 1e-6 * threshold {
            skipped += 1;
            continue;
        }
        let boundary = n_k >= threshold;
        ensure((s.branch == Branch::BoundaryZero) == boundary, || {
            format!(
                "{b:?}: branch {:?}, n_k {n_k} vs threshold {threshold}",
                s.branch
            )
        })?;
        if s.branch == Branch::Interior {
            interior += 1;
            let q = s
                .quadratic_root
                .ok_or_else(|| format!("{b:?}: no quadratic root"))?;
            ensure((q - s.theta).abs() <= 1e-6, || {
                format!("{b:?}: root {q} vs θ* {}", s.theta)
            })?;
        }
    }
    Ok(format!(
        "1000 inputs, {interior} interior, {skipped} on the branch boundary"
    ))
}

fn sweep_matches_exhaustive() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for t in 0..500 {
        let m = rng.random_range(1..=12);
        let scores: Vec<f64> = (0..m).map(|_| rng.random_range(0..6) as f64).collect();
        let labels: Vec<f64> = (0..m)
            .map(|_| f64::from(u8::from(rng.random::<bool>())))
            .collect();
        let sweep = sweep_thresholds(&scores, &labels).map_err(e)?;

        let mut distinct = scores.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let mut cuts = vec![distinct[0] - 1.0];
        cuts.extend(&distinct);
        let class = FiniteClass::new(
            cuts.iter()
                .map(|&threshold| Predictor::Threshold {
                    score: LinearModel::coordinate(1, 0),
                    threshold,
                })
                .collect(),
        )
        .map_err(e)?;
        let ds = Dataset::new(
            scores.iter().map(|&s| vec![s]).collect(),
            labels.clone(),
            vec![1; m],
            1,
            Mode::Binary,
            None,
        )
        .map_err(e)?;
        let all: Vec<usize> = (0..m).collect();
        let oracle = exhaustive_learn(
            &class,
            &ds,
            &WeightedSample::uniform(&all),
            DEFAULT_BUDGET,
            Exec::Sequential,
        )
        .map_err(e)?;
        let got: Vec<(usize, f64)> = sweep
            .cuts
            .iter()
            .map(|c| (c.positives, c.errors as f64 / m as f64))
            .collect();
        let want: Vec<(usize, f64)> = oracle
            .iter()
            .map(|c| (c.positives, c.weighted_error))
            .collect();
        ensure(got == want, || {
            format!("instance {t}: sweep {got:?} vs oracle {want:?}")
        })?;
        for c in &sweep.cuts {
            let z: Vec<bool> = scores.iter().map(|&s| s > c.threshold).collect();
            let fp = (0..m).filter(|&i| z[i] && labels[i] == 0.0).count();
            let fn_ = (0..m).filter(|&i| !z[i] && labels[i] == 1.0).count();
            ensure(
                z.iter().filter(|&&b| b).count() == c.positives
                    && fp == c.false_positives
                    && fn_ == c.false_negatives,
                || format!("instance {t}: cut {c:?} does not match its threshold"),
            )?;
        }
    }
    Ok("500 instances with tied scores".into())
}

fn minority_mse(model: &Predictor, rows: &[(Vec<f64>, f64)]) -> f64 {
    rows.iter()
        .map(|(x, y)| (model.predict(x) - y).powi(2))
        .sum::<f64>()
        / rows.len() as f64
}

fn bundled() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_regression.csv")
}

fn bundled_config(grid: Vec<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new("target", Mode::Regression);
    cfg.input_path = Some(bundled());
    cfg.seed = 7;
    cfg.transfer.theta_grid = grid;
    cfg
}

fn transfer_benefit() -> Check {
    let start = Instant::now();
    let gen = IdenticalGroups { noise_sd: 0.1 };
    let cfg = TransferConfig::default();
    let base = LeastSquares::default();
    let mut wins = 0;
    for rep in 0..20u64 {
        let fx = gen.generate(1000, 10, 100 + rep).map_err(e)?;
        let ds = &fx.dataset;
        let (minor, major) = (ds.group_rows(2), ds.group_rows(1));
        let cv =
            select_theta_cv(ds, &minor, &major, &cfg, &base, rep, Exec::default()).map_err(e)?;
        let with = transfer_fit(ds, &minor, &major, cv.theta, &base).map_err(e)?;
        let without = transfer_fit(ds, &minor, &major, 0.0, &base).map_err(e)?;
        let fresh = gen.sample_group(2, 2000, 900 + rep).map_err(e)?;
        if minority_mse(&with[0].predictor, &fresh) < minority_mse(&without[0].predictor, &fresh) {
            wins += 1;
        }
    }
    ensure(wins >= 16, || format!("transfer won {wins} of 20"))?;
    within(Duration::from_secs(120), start)?;

    // Fit counter: outer folds × inner folds × grid size per group.
    let mut counts = Vec::new();
    let eleven: Vec<f64> = (0..=10).rev().map(|i| 2f64.powi(-i)).collect();
    for grid in [TransferConfig::default().theta_grid, eleven] {
        let g = grid.len() as u64;
        let r = run_experiment(&bundled_config(grid)).map_err(e)?.report;
        let total = r.fit_counts[&Baseline::DecoupledTransfer];
        let (outer, inner) = (
            r.config.outer_folds as u64,
            r.config.transfer.inner_folds as u64,
        );
        // Each group also gets one final fit per outer fold.
        let per_group_cv = total / 2 - outer;
        ensure(per_group_cv == outer * inner * g, || {
            format!("grid of {g}: {per_group_cv} cross-validation fits per group")
        })?;
        counts.push(format!("{per_group_cv} (grid {g})"));
    }
    Ok(format!(
        "transfer won {wins}/20; CV fits per group {}",
        counts.join(", ")
    ))
}

fn determinism_and_leakage() -> Check {
    let cfg = bundled_config(TransferConfig::default().theta_grid);
    let dir = tempfile::tempdir().map_err(e)?;
    let a = run_experiment(&cfg).map_err(e)?.report;
    let mut seq = cfg.clone();
    seq.exec = Exec::Sequential;
    let b = run_experiment(&seq).map_err(e)?.report;
    emit_report(&a, &dir.path().join("a")).map_err(e)?;
    emit_report(&b, &dir.path().join("b")).map_err(e)?;
    let x = std::fs::read(dir.path().join("a/report.json")).map_err(e)?;
    let y = std::fs::read(dir.path().join("b/report.json")).map_err(e)?;
    ensure(x == y, || "report.json differs between runs".into())?;

    let ing = ingest_csv(&bundled(), "target", Mode::Regression).map_err(e)?;
    let sel = select_sensitive_attribute(&ing.dataset, &selection_options(&cfg)).map_err(e)?;
    let folds = outer_folds(&sel, &cfg);
    let base = run_selected(&sel, vec![], &cfg).map_err(e)?;
    for f in 0..cfg.outer_folds {
        let labels: Vec<f64> = (0..sel.dataset.n())
            .map(|i| {
                let y = sel.dataset.label(i);
                if folds[i] == f {
                    1.0 - y
                } else {
                    y
                }
            })
            .collect();
        let mut perturbed = sel.clone();
        perturbed.dataset = sel.dataset.with_labels(labels);
        let out = run_selected(&perturbed, vec![], &cfg).map_err(e)?;
        ensure(out.models[f] == base.models[f], || {
            format!("fold {f} models changed")
        })?;
    }
    Ok(format!(
        "{} bytes identical; {} folds leak-free",
        x.len(),
        cfg.outer_folds
    ))
}

fn main() -> ExitCode {
    let checks: [(&str, CheckFn); 9] = [
        ("coupling cost on parity", coupling_cost_on_parity),
        ("flipped minority separators", flipped_minority),
        ("decouple equals brute force", decouple_matches_brute_force),
        ("monotonicity boundary", monotonicity_boundary),
        ("error decomposition identities", error_decomposition),
        ("theta star minimizer and branch", theta_star_minimizes),
        ("threshold sweep oracle", sweep_matches_exhaustive),
        ("transfer benefit and fit counter", transfer_benefit),
        ("pipeline determinism and leakage", determinism_and_leakage),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let result = check();
        let t = start.elapsed();
        match result {
            Ok(detail) => println!("PASS  {name} [{t:.2?}] {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} [{t:.2?}] {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
