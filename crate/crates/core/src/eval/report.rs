//! Evaluation summary and its text and CSV renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{bootstrap_ci, calibration, concordance_index, CurvePoint};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub events: usize,
    pub c_index: f64,
    /// Percentile interval; not forced to contain `c_index`.
    pub c_index_ci: (f64, f64),
    pub n_bootstrap: usize,
    pub bootstrap_failures: usize,
    pub horizon: f64,
    pub mean_predicted_risk: f64,
    pub mean_observed_risk: f64,
    pub ici: f64,
    pub calibration_curve: Vec<CurvePoint>,
}

/// Discrimination of `scores` and calibration of `risks` on one dataset.
///
/// The bootstrap resamples the rows given here; pass the held-out split only.
pub fn evaluate(
    times: &[f64],
    events: &[bool],
    scores: &[f64],
    risks: &[f64],
    horizon: f64,
    rounds: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let c_index = concordance_index(times, events, scores)?;
    let ci = bootstrap_ci(times.len(), rounds, seed, |rows| {
        let t: Vec<f64> = rows.iter().map(|&i| times[i]).collect();
        let e: Vec<bool> = rows.iter().map(|&i| events[i]).collect();
        let s: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
        concordance_index(&t, &e, &s)
    })?;
    let cal = calibration(risks, times, events, horizon)?;
    Ok(EvaluationReport {
        n: times.len(),
        events: events.iter().filter(|e| **e).count(),
        c_index,
        c_index_ci: (ci.low, ci.high),
        n_bootstrap: ci.rounds,
        bootstrap_failures: ci.failures,
        horizon,
        mean_predicted_risk: cal.mean_predicted,
        mean_observed_risk: cal.mean_observed,
        ici: cal.ici,
        calibration_curve: cal.curve,
    })
}

impl EvaluationReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "subjects            {}", self.n);
        let _ = writeln!(s, "events              {}", self.events);
        let _ = writeln!(
            s,
            "c-index             {:.4} (95% CI {:.4}-{:.4}, {} bootstrap rounds)",
            self.c_index, self.c_index_ci.0, self.c_index_ci.1, self.n_bootstrap
        );
        let _ = writeln!(s, "horizon             {} years", self.horizon);
        let _ = writeln!(s, "mean predicted risk {:.3}%", 100.0 * self.mean_predicted_risk);
        let _ = writeln!(s, "mean observed risk  {:.3}%", 100.0 * self.mean_observed_risk);
        let _ = writeln!(s, "ICI                 {:.3}%", 100.0 * self.ici);
        s
    }

    pub fn calibration_csv(&self) -> String {
        let mut s = String::from("predicted,observed\n");
        for p in &self.calibration_curve {
            let _ = writeln!(s, "{},{}", p.predicted, p.observed);
        }
        s
    }
}

/// One row per coefficient: estimate, interval and hazard ratios.
pub fn forest_plot_csv(names: &[String], coefficients: &[f64], low: &[f64], high: &[f64]) -> String {
    let mut s = String::from("feature,coefficient,ci_low,ci_high,hazard_ratio,hr_low,hr_high\n");
    for (k, name) in names.iter().enumerate() {
        let (b, l, h) = (coefficients[k], low[k], high[k]);
        let _ = writeln!(s, "{name},{b},{l},{h},{},{},{}", b.exp(), l.exp(), h.exp());
    }
    s
}
