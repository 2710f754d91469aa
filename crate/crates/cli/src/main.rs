use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use fairsplit_core::analysis::{make_figure1_fixture, make_parity_fixture, ParityTarget};
use fairsplit_core::losses::{find_monotonicity_counterexample_with, SearchOptions};
use fairsplit_core::pipeline::{
    emit_report, run_experiment, Baseline, ExperimentConfig, LearnerKind, RunStatus,
};
use fairsplit_core::transfer::{default_theta_grid, theta_star, BoundInputs};
use fairsplit_core::{Error, Exec, LossSpec, Mode};

const EXIT_DISCARDED: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(
    name = "fairsplit",
    version,
    about = "Decoupled group-wise classification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the cross-validated baselines on a CSV file and write a report.
    Run(RunArgs),
    /// Write a synthetic fixture as CSV.
    Fixture(FixtureArgs),
    /// Search small instances for a swap that lowers a loss.
    CheckLoss(CheckLossArgs),
    /// Minimize the single-group transfer bound over θ.
    Bound(BoundArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    label: String,
    /// Sensitive column; by default the first binary column with enough rows per side.
    #[arg(long)]
    sensitive: Option<String>,
    #[arg(long)]
    mode: Mode,
    #[arg(long, default_value = "balanced")]
    loss: LossSpec,
    /// Learner: least-squares, lsq-threshold or stumps. Defaults by mode.
    #[arg(long)]
    learner: Option<LearnerKind>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 5)]
    inner_folds: usize,
    /// `default` or a comma-separated list of θ values in [0,1].
    #[arg(long, default_value = "default")]
    theta_grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "blind,coupled,decoupled,decoupled_transfer"
    )]
    baselines: Vec<Baseline>,
    #[arg(long)]
    min_per_group: Option<usize>,
    #[arg(long)]
    max_per_group: Option<usize>,
    /// Run every loop on the calling thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureName {
    Parity,
    Figure1,
}

#[derive(clap::Args)]
struct FixtureArgs {
    #[arg(long)]
    name: FixtureName,
    #[arg(long)]
    out: PathBuf,
    /// Parity dimension.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Parity labels: regression or separator.
    #[arg(long, value_enum, default_value = "separator")]
    target: Target,
    #[arg(long, default_value_t = 200)]
    n_major: usize,
    #[arg(long, default_value_t = 20)]
    n_minor: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Regression,
    Separator,
}

#[derive(clap::Args)]
struct CheckLossArgs {
    #[arg(long)]
    loss: LossSpec,
    #[arg(long, default_value_t = 8)]
    max_n: usize,
    /// Group count; fixed-profile losses use their profile length.
    #[arg(long, default_value_t = 2)]
    groups: usize,
    /// Cap on instances examined.
    #[arg(long, default_value_t = u64::MAX)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct BoundArgs {
    #[arg(long)]
    nk: u64,
    #[arg(long)]
    nmk: u64,
    #[arg(long)]
    delta_cap: f64,
    #[arg(long)]
    confidence: f64,
    #[arg(long)]
    class_size: u64,
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Error> {
    if s == "default" {
        return Ok(default_theta_grid());
    }
    s.split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("theta grid value `{v}` is not a number"))
            })
        })
        .collect()
}

fn run(args: RunArgs) -> Result<u8> {
    if !args.input.is_file() {
        return Err(Error::InvalidParameter(format!(
            "input file {} not found",
            args.input.display()
        ))
        .into());
    }
    let mut cfg = ExperimentConfig::new(args.label, args.mode);
    cfg.input_path = Some(args.input);
    cfg.sensitive_column = args.sensitive;
    cfg.loss = args.loss;
    if let Some(l) = args.learner {
        cfg.learner = l;
    }
    cfg.outer_folds = args.folds;
    cfg.transfer.inner_folds = args.inner_folds;
    cfg.transfer.theta_grid = parse_grid(&args.theta_grid)?;
    cfg.seed = args.seed;
    cfg.baselines = args.baselines;
    if let Some(m) = args.min_per_group {
        cfg.min_per_group = m;
    }
    if let Some(m) = args.max_per_group {
        cfg.max_per_group = m;
    }
    if args.sequential {
        cfg.exec = Exec::Sequential;
    }
    let report = run_experiment(&cfg)?.report;
    emit_report(&report, &args.out)?;
    print!("{}", report.summary_csv()?);
    if !report.degenerate_folds.is_empty() {
        eprintln!("degenerate folds: {:?}", report.degenerate_folds);
    }
    if report.status == RunStatus::DiscardedTrivial {
        eprintln!("discarded: blind baseline loss is below the trivial cutoff");
        return Ok(EXIT_DISCARDED);
    }
    Ok(0)
}

fn fixture(args: FixtureArgs) -> Result<u8> {
    let fx = match args.name {
        FixtureName::Parity => {
            let target = match args.target {
                Target::Regression => ParityTarget::Regression,
                Target::Separator => ParityTarget::Separator,
            };
            make_parity_fixture(args.d, target, args.seed)?
        }
        FixtureName::Figure1 => make_figure1_fixture(args.n_major, args.n_minor, args.seed)?,
    };
    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fx.write_csv(BufWriter::new(file))?;
    let summary = json!({
        "description": fx.description,
        "rows": fx.dataset.n(),
        "group_sizes": fx.dataset.group_counts(),
        "expected_coupled_loss": fx.expected_coupled_loss,
        "expected_decoupled_loss": fx.expected_decoupled_loss,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn check_loss(args: CheckLossArgs) -> Result<u8> {
    let groups = match &args.loss {
        LossSpec::FixedProfile { target } => target.len(),
        _ => args.groups,
    };
    let opts = SearchOptions::new(groups, args.max_n, args.budget, args.seed);
    let r = find_monotonicity_counterexample_with(&args.loss, &opts)?;
    let witness = r.witness.as_ref().map(|w| {
        json!({
            "groups": w.instance.groups,
            "labels": w.instance.labels,
            "classifications": w.instance.classifications,
            "i": w.i,
            "j": w.j,
            "loss_before": w.before,
            "loss_after": w.after,
        })
    });
    let out = json!({
        "loss": args.loss.id(),
        "groups": groups,
        "max_n": args.max_n,
        "monotonic_on_search": r.witness.is_none(),
        "examined": r.examined,
        "complete": r.complete,
        "witness": witness,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

fn bound(args: BoundArgs) -> Result<u8> {
    let b = BoundInputs {
        n_k: args.nk,
        n_minus_k: args.nmk,
        delta_cap: args.delta_cap,
        confidence: args.confidence,
        class_size: args.class_size,
    };
    let s = theta_star(&b)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({ "inputs": b, "theta_star": s }))?
    );
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Discarded(_)) => EXIT_DISCARDED,
        Some(
            Error::InvalidParameter(_)
            | Error::LossParse { .. }
            | Error::IncompatibleLoss(_)
            | Error::InvalidDataset(_)
            | Error::Cell { .. }
            | Error::TooManyGroups { .. },
        ) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Fixture(a) => fixture(a),
        Command::CheckLoss(a) => check_loss(a),
        Command::Bound(a) => bound(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
