//! Discrimination and calibration metrics.

mod bootstrap;
mod calibration;
mod concordance;
mod report;

pub use bootstrap::{bootstrap_ci, BootstrapInterval, DEFAULT_ROUNDS};
pub use calibration::{
    calibration, lowess, lowess_with_delta, pseudo_observations, Calibration, CurvePoint, KaplanMeier, CURVE_POINTS, DEFAULT_SPAN,
};
pub use concordance::{concordance_counts, concordance_index, PairCounts};
pub use report::{evaluate, forest_plot_csv, EvaluationReport};

#[cfg(test)]
mod tests;
