//! Decoupled group-wise classification.

pub mod analysis;
pub mod dataset;
pub mod decouple;
pub mod error;
pub mod exec;
pub mod learners;
pub mod losses;
pub mod model;
pub mod pipeline;
pub mod transfer;

pub use dataset::{ColumnKind, ColumnMeta, Dataset, Mode};
pub use error::{Error, Result};
pub use exec::Exec;
pub use losses::LossSpec;
pub use model::{
    predict_decoupled, CandidateClassifier, DecoupledClassifier, LinearModel, Predictor,
};
