//! Cox proportional-hazards regression.

mod fit;
pub mod likelihood;

pub use fit::{fit_coefficients, FitDiagnostics, FitOptions};
pub use likelihood::{neg_log_partial_likelihood, LikelihoodEval, PartialLikelihood, RiskSetIndex};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::{model_column_index, EncodedCohort, Standardization, SubjectRecord};
use crate::error::{Error, Result};

/// Breslow cumulative baseline hazard as a right-continuous step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazard {
    /// Strictly increasing; starts at 0.
    pub times: Vec<f64>,
    /// `cumhaz[k] = H0(times[k])`, nondecreasing, `cumhaz[0] = 0`.
    pub cumhaz: Vec<f64>,
    /// Largest observed time in the fitting data; queries beyond it are refused.
    pub max_time: f64,
}

impl BaselineHazard {
    /// `H0(t)`: value at the last tabulated time at or before `t`.
    pub fn at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || t > self.max_time {
            return Err(Error::HorizonOutOfRange {
                horizon: t,
                coverage: self.max_time,
            });
        }
        let k = self.times.partition_point(|&s| s <= t);
        Ok(if k == 0 { 0.0 } else { self.cumhaz[k - 1] })
    }
}

/// `H0(t) = sum over event times t_i <= t of d_i / sum_{j at risk at t_i} exp(x_j beta)`.
pub fn breslow_baseline(cohort: &EncodedCohort, beta: &[f64]) -> Result<BaselineHazard> {
    if cohort.n() == 0 {
        return Err(Error::EmptyCohort);
    }
    let lik = PartialLikelihood::for_cohort(cohort)?;
    let eta = lik.linear_predictor(beta)?;
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let index = RiskSetIndex::new(&cohort.times);
    // descending sweep collects (time, d, log S0); reversed afterwards
    let mut s0 = 0.0;
    let mut steps = Vec::new();
    for group in index.groups_desc() {
        let mut d = 0usize;
        for &i in group {
            s0 += (eta[i] - shift).exp();
            d += cohort.events[i] as usize;
        }
        if d > 0 {
            let t = cohort.times[group[0]];
            steps.push((t, ((d as f64).ln() - shift - s0.ln()).exp()));
        }
    }
    let mut times = vec![0.0];
    let mut cumhaz = vec![0.0];
    let mut h = 0.0;
    for (t, inc) in steps.into_iter().rev() {
        h += inc;
        times.push(t);
        cumhaz.push(h);
    }
    let max_time = cohort.times.iter().copied().fold(0.0, f64::max);
    Ok(BaselineHazard { times, cumhaz, max_time })
}

pub const MODEL_FORMAT: &str = "t2drisk.cox-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub feature_names: Vec<String>,
    /// Log hazard ratios on the standardized scale.
    pub coefficients: Vec<f64>,
    /// Transform from raw design values to the scale of `coefficients`.
    pub standardization: Standardization,
    pub baseline: BaselineHazard,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FitDiagnostics>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    model: CoxModel,
}

/// Fits coefficients and the Breslow baseline on a (standardized) cohort.
pub fn fit(cohort: &EncodedCohort, opts: &FitOptions) -> Result<(CoxModel, FitDiagnostics)> {
    let (beta, diag) = fit_coefficients(cohort, opts)?;
    let baseline = breslow_baseline(cohort, &beta)?;
    if !(opts.horizon > 0.0) || opts.horizon > baseline.max_time {
        return Err(Error::HorizonOutOfRange {
            horizon: opts.horizon,
            coverage: baseline.max_time,
        });
    }
    let model = CoxModel {
        feature_names: cohort.feature_names.clone(),
        coefficients: beta,
        standardization: cohort.standardization.clone(),
        baseline,
        horizon: opts.horizon,
        diagnostics: Some(diag.clone()),
    };
    Ok((model, diag))
}

impl CoxModel {
    /// `x beta` for a row already on the model's standardized scale.
    pub fn linear_predictor_encoded(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                got: row.len(),
            });
        }
        Ok(row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum())
    }

    /// Encodes and standardizes a raw record with the model's own parameters.
    pub fn encode_record(&self, record: &SubjectRecord) -> Result<Vec<f64>> {
        let raw = record.encode_raw();
        self.feature_names
            .iter()
            .zip(&self.standardization.columns)
            .map(|(name, t)| {
                let j = model_column_index(name).ok_or_else(|| Error::UnknownFeature(name.clone()))?;
                Ok(t.apply(raw[j]))
            })
            .collect()
    }

    pub fn linear_predictor(&self, record: &SubjectRecord) -> Result<f64> {
        self.linear_predictor_encoded(&self.encode_record(record)?)
    }

    /// `1 - exp(-H0(horizon) exp(eta))`.
    pub fn risk_from_eta(&self, eta: f64, horizon: f64) -> Result<f64> {
        let h0 = self.baseline.at(horizon)?;
        Ok(-(-h0 * eta.exp()).exp_m1())
    }

    /// Linear predictors for every row of a cohort standardized like this model.
    pub fn cohort_linear_predictors(&self, cohort: &EncodedCohort) -> Result<Vec<f64>> {
        if cohort.feature_names != self.feature_names {
            return Err(Error::InvalidArgument(
                "cohort columns differ from the model's features".into(),
            ));
        }
        cohort
            .matrix
            .rows()
            .into_iter()
            .map(|r| self.linear_predictor_encoded(r.as_slice().expect("standard layout")))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::Format(format!("expected `{MODEL_FORMAT}`, found `{}`", doc.format)));
        }
        if doc.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", doc.version)));
        }
        let m = doc.model;
        let p = m.feature_names.len();
        if m.coefficients.len() != p || m.standardization.columns.len() != p {
            return Err(Error::Format("coefficient and feature counts differ".into()));
        }
        let b = &m.baseline;
        let monotone = b.times.windows(2).all(|w| w[0] < w[1]) && b.cumhaz.windows(2).all(|w| w[0] <= w[1]);
        if b.times.len() != b.cumhaz.len() || b.times.is_empty() || b.cumhaz[0] < 0.0 || !monotone {
            return Err(Error::Format("baseline hazard table is not a nondecreasing step function".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Risk of an event by `horizon` for a raw record.
pub fn predict_risk(model: &CoxModel, record: &SubjectRecord, horizon: f64) -> Result<f64> {
    let eta = model.linear_predictor(record)?;
    model.risk_from_eta(eta, horizon)
}
