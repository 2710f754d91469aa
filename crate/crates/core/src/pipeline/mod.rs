//! Semi-synthetic experiment harness: ingestion, sensitive-column choice,
//! outer cross-validation over the baselines, and report files.

mod experiment;
mod ingest;
mod report;
mod select;

pub use experiment::{
    aggregate, outer_folds, run_experiment, run_on_dataset, run_selected, selection_options,
    Baseline, ExperimentConfig, ExperimentOutcome, FoldModels, LearnerKind, TrainedModel,
    TRIVIAL_LOSS,
};
pub use ingest::{ingest_csv, ingest_reader, Ingested};
pub use report::{emit_report, Aggregate, DatasetInfo, FoldEntry, Report, RunStatus};
pub use select::{
    select_sensitive_attribute, stratified_folds, SelectionOptions, SensitiveSelection,
    DEFAULT_MAX_PER_GROUP, DEFAULT_MIN_PER_GROUP,
};
