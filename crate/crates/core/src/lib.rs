//! Ten-year type 2 diabetes risk modelling.
//!
//! - [`cohort`]: subject records, CSV ingestion, encoding and splits
//! - [`synth`]: synthetic cohorts from published marginals and a ground-truth Cox model
//! - [`cox`]: partial-likelihood fitting, Breslow baseline, risk prediction
//! - [`neural`]: feedforward Cox network trained on the partial likelihood
//! - [`eval`]: concordance, bootstrap intervals, calibration
//! - [`select`]: cross-validated backward elimination
//! - [`engine`]: the published 19-term model as a fixed scorer

pub mod cohort;
pub mod cox;
pub mod engine;
pub mod error;
pub mod eval;
pub mod neural;
pub mod select;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
