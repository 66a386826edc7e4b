//! The published 19-term model as a fixed scorer.
//!
//! Log hazard ratios and their intervals are stored verbatim. The source does
//! not state the units of the four continuous terms; they are read as per-SD
//! effects after z-scoring with the cohort medians as centers and the SD of
//! the fitted marginal distributions as scales. That convention is recorded in
//! every artifact. The ten-year baseline survival is not published either and
//! is solved so that the mean predicted risk on a reference cohort matches
//! the published mean.

mod profile;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use profile::{ProfileInput, PROFILE_FIELDS};

use crate::cohort::{ColumnKind, Ethnicity, SubjectRecord, MODEL_COLUMNS};
use crate::error::{Error, Result};
use crate::stats::bisect;
use crate::synth::{paper_preset, sample_features, GeneratorConfig};

pub const ARTIFACT_FORMAT: &str = "t2drisk.published-model";
pub const ARTIFACT_VERSION: u32 = 1;
pub const MODEL_VERSION: &str = "1.0.0";
pub const HORIZON_YEARS: f64 = 10.0;
/// Published mean predicted ten-year risk.
pub const TARGET_MEAN_RISK: f64 = 0.0359;
pub const DISCLAIMER: &str = "Statistical estimate for information only. Not a diagnosis or medical advice; \
     consult a healthcare professional about your health.";
pub const STANDARDIZATION_NOTE: &str = "Continuous terms are z-scored: (value - center) / scale, with centers at the \
     cohort medians and scales at the SD of log-normal marginals matched to the cohort quartiles \
     (a zero-inflated mixture for pack-years). This is an interpretation; the source tables do not state the units.";

/// Record fields that what-if requests may change by default.
pub const DEFAULT_MODIFIABLE: [&str; 6] =
    ["bmi", "waist_hip_ratio", "currently_smoking", "pack_years", "alcohol_monthly_plus", "daytime_dozing"];

/// `(column, label, log HR, CI low, CI high, -log2 p)`; `None` p means "> 500".
type Row = (&'static str, &'static str, f64, f64, f64, Option<f64>);

pub const PUBLISHED_TABLE: [Row; 19] = [
    ("age", "Age", 0.242, 0.222, 0.262, Some(409.902)),
    ("waist_hip_ratio", "Waist/hip ratio", 0.440, 0.423, 0.458, None),
    ("bmi", "BMI", 0.399, 0.386, 0.413, None),
    ("ethnicity_asian", "Ethnicity - Asian", 0.844, 0.764, 0.925, Some(308.259)),
    ("ethnicity_black", "Ethnicity - Black", 0.532, 0.436, 0.628, Some(88.794)),
    ("degree", "College/university degree", -0.217, -0.258, -0.175, Some(78.980)),
    (
        "cvd_diagnosis",
        "Ever diagnosed heart attack / angina / stroke / high blood pressure",
        0.368,
        0.330,
        0.405,
        Some(265.184),
    ),
    ("cholesterol_meds", "Medications for cholesterol", 0.285, 0.244, 0.325, Some(142.329)),
    (
        "other_meds",
        "Other prescription medications (excl. diabetes/cholesterol/blood pressure)",
        0.250,
        0.212,
        0.287,
        Some(128.297),
    ),
    ("stomach_pain", "Stomach or abdominal pain in last month", 0.177, 0.125, 0.228, Some(35.703)),
    ("daytime_dozing", "Daytime dozing (tabulated as narcolepsy)", 0.176, 0.141, 0.211, Some(72.542)),
    ("breathless_level_ground", "Shortness of breath walking on level ground", 0.031, -0.031, 0.093, Some(1.634)),
    ("diabetes_father", "Diabetes in father", 0.385, 0.334, 0.436, Some(161.204)),
    ("diabetes_mother", "Diabetes in mother", 0.489, 0.443, 0.535, Some(313.265)),
    ("diabetes_siblings", "Diabetes in siblings", 0.422, 0.372, 0.471, Some(207.302)),
    ("alcohol_monthly_plus", "Drinks alcohol once a month or more", -0.375, -0.413, -0.337, Some(276.673)),
    ("currently_smoking", "Currently smoking", 0.278, 0.229, 0.328, Some(90.997)),
    ("pack_years", "Smoking pack-years", 0.086, 0.074, 0.098, Some(145.292)),
    ("good_health", "Good or excellent health (self-reported)", -0.323, -0.360, -0.286, Some(212.648)),
];

/// Record field that feeds a model column.
pub fn field_of_column(column: &str) -> &str {
    match column {
        "ethnicity_asian" | "ethnicity_black" => "ethnicity",
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedTerm {
    pub name: String,
    pub label: String,
    /// Record field this term is computed from.
    pub field: String,
    pub kind: ColumnKind,
    pub coefficient: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `None` where the table reports only "> 500".
    pub neg_log2_p: Option<f64>,
    pub center: f64,
    pub scale: f64,
    pub modifiable: bool,
    /// Interval crosses zero.
    pub ci_includes_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationProvenance {
    pub target_mean_risk: f64,
    pub achieved_mean_risk: f64,
    pub reference: String,
    pub reference_n: usize,
    pub reference_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedModel {
    pub format: String,
    pub format_version: u32,
    pub model_version: String,
    pub horizon_years: f64,
    pub terms: Vec<PublishedTerm>,
    /// `S0(horizon)`.
    pub baseline_survival: f64,
    pub calibration: CalibrationProvenance,
    pub standardization: String,
    pub disclaimer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    pub label: String,
    /// Input on the record's scale: the raw value or 0/1 indicator.
    pub value: f64,
    /// Value after centering and scaling.
    pub encoded: f64,
    pub coefficient: f64,
    pub contribution: f64,
    pub modifiable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskBreakdown {
    pub total_risk: f64,
    pub linear_predictor: f64,
    pub horizon_years: f64,
    pub contributions: Vec<Contribution>,
    pub model_version: String,
    pub disclaimer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub before: RiskBreakdown,
    pub after: RiskBreakdown,
    pub delta: f64,
}

/// Solves `mean(1 - S0^exp(lp)) = target` for `S0` by bisection.
pub fn calibrate_baseline(linear_predictors: &[f64], target_mean_risk: f64) -> Result<f64> {
    if linear_predictors.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let weights: Vec<f64> = linear_predictors.iter().map(|lp| lp.exp()).collect();
    let n = weights.len() as f64;
    // mean risk as a function of u = -ln S0, increasing in u
    let mean_risk = |u: f64| weights.iter().map(|w| -(-u * w).exp_m1()).sum::<f64>() / n;
    let (lo, hi) = (-(1.0 - 1e-9f64).ln(), -(1e-9f64).ln());
    let u = bisect(|ln_u| mean_risk(ln_u.exp()) - target_mean_risk, lo.ln(), hi.ln(), 1e-15, 400)
        .map(f64::exp)
        .ok_or(Error::CalibrationBracket(target_mean_risk))?;
    Ok((-u).exp())
}

impl PublishedModel {
    /// Published terms with centers and scales from `config`, baseline
    /// calibrated on the feature sample it generates.
    pub fn build(config: &GeneratorConfig, target_mean_risk: f64) -> Result<Self> {
        let standardization = config.truth_standardization()?;
        let terms: Vec<PublishedTerm> = PUBLISHED_TABLE
            .iter()
            .zip(MODEL_COLUMNS.iter())
            .zip(&standardization.columns)
            .map(|(((name, label, b, lo, hi, p), column), t)| {
                debug_assert_eq!(*name, column.name);
                let field = field_of_column(name);
                PublishedTerm {
                    name: name.to_string(),
                    label: label.to_string(),
                    field: field.to_string(),
                    kind: column.kind,
                    coefficient: *b,
                    ci_low: *lo,
                    ci_high: *hi,
                    neg_log2_p: *p,
                    center: t.center,
                    scale: t.scale,
                    modifiable: DEFAULT_MODIFIABLE.contains(&field),
                    ci_includes_zero: *lo < 0.0 && *hi > 0.0,
                }
            })
            .collect();
        let mut model = PublishedModel {
            format: ARTIFACT_FORMAT.into(),
            format_version: ARTIFACT_VERSION,
            model_version: MODEL_VERSION.into(),
            horizon_years: HORIZON_YEARS,
            terms,
            baseline_survival: 0.5,
            calibration: CalibrationProvenance {
                target_mean_risk,
                achieved_mean_risk: f64::NAN,
                reference: "synthetic feature sample from the published cohort marginals".into(),
                reference_n: config.n,
                reference_seed: config.seed,
            },
            standardization: STANDARDIZATION_NOTE.into(),
            disclaimer: DISCLAIMER.into(),
        };
        let records = sample_features(config)?;
        let lps: Vec<f64> = records.iter().map(|r| model.linear_predictor(r)).collect();
        model.baseline_survival = calibrate_baseline(&lps, target_mean_risk)?;
        model.calibration.achieved_mean_risk =
            lps.iter().map(|lp| model.risk_from_lp(*lp)).sum::<f64>() / lps.len() as f64;
        Ok(model)
    }

    /// The default artifact: full-size preset reference cohort, published target.
    pub fn published() -> Result<Self> {
        Self::build(&paper_preset(), TARGET_MEAN_RISK)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format(m));
        if self.format != ARTIFACT_FORMAT || self.format_version != ARTIFACT_VERSION {
            return bad(format!("unsupported artifact {} v{}", self.format, self.format_version));
        }
        if self.terms.len() != MODEL_COLUMNS.len()
            || self.terms.iter().zip(MODEL_COLUMNS.iter()).any(|(t, c)| t.name != c.name || t.kind != c.kind)
        {
            return bad("artifact terms must list the 19 model columns in canonical order".into());
        }
        for t in &self.terms {
            if t.field != field_of_column(&t.name) {
                return bad(format!("term {} must read field {}", t.name, field_of_column(&t.name)));
            }
            if ![t.coefficient, t.ci_low, t.ci_high, t.center, t.scale].iter().all(|v| v.is_finite()) || t.scale <= 0.0 {
                return bad(format!("term {} has non-finite values or a non-positive scale", t.name));
            }
            if t.kind == ColumnKind::Indicator && (t.center != 0.0 || t.scale != 1.0) {
                return bad(format!("indicator term {} must not be rescaled", t.name));
            }
        }
        let ethnicity: Vec<bool> = self.terms.iter().filter(|t| t.field == "ethnicity").map(|t| t.modifiable).collect();
        if ethnicity.windows(2).any(|w| w[0] != w[1]) {
            return bad("ethnicity terms must share one modifiable flag".into());
        }
        if !(self.baseline_survival > 0.0 && self.baseline_survival < 1.0) {
            return bad(format!("baseline survival {} outside (0, 1)", self.baseline_survival));
        }
        if !(self.horizon_years > 0.0) {
            return bad("horizon must be positive".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: PublishedModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn is_modifiable(&self, field: &str) -> bool {
        match field {
            // not a model term; changing it never moves the score
            "previous_smoker" => true,
            f => self.terms.iter().any(|t| t.field == f && t.modifiable),
        }
    }

    /// Replaces the modifiable flags; every name must be a record field.
    pub fn with_modifiable(mut self, fields: &[&str]) -> Result<Self> {
        for f in fields {
            if !self.terms.iter().any(|t| t.field == *f) {
                return Err(Error::UnknownFeature(f.to_string()));
            }
        }
        for t in &mut self.terms {
            t.modifiable = fields.contains(&t.field.as_str());
        }
        Ok(self)
    }

    pub fn risk_from_lp(&self, lp: f64) -> f64 {
        // 1 - S0^exp(lp), without cancellation for small risks
        -(lp.exp() * self.baseline_survival.ln()).exp_m1()
    }

    fn contributions(&self, record: &SubjectRecord) -> Vec<Contribution> {
        record
            .encode_raw()
            .iter()
            .zip(&self.terms)
            .map(|(&value, t)| {
                let encoded = (value - t.center) / t.scale;
                Contribution {
                    feature: t.name.clone(),
                    label: t.label.clone(),
                    value,
                    encoded,
                    coefficient: t.coefficient,
                    contribution: t.coefficient * encoded,
                    modifiable: t.modifiable,
                }
            })
            .collect()
    }

    pub fn linear_predictor(&self, record: &SubjectRecord) -> f64 {
        self.contributions(record).iter().map(|c| c.contribution).sum()
    }

    pub fn score(&self, record: &SubjectRecord) -> Result<RiskBreakdown> {
        record.validate()?;
        let contributions = self.contributions(record);
        let linear_predictor = contributions.iter().map(|c| c.contribution).sum();
        Ok(RiskBreakdown {
            total_risk: self.risk_from_lp(linear_predictor),
            linear_predictor,
            horizon_years: self.horizon_years,
            contributions,
            model_version: self.model_version.clone(),
            disclaimer: self.disclaimer.clone(),
        })
    }

    pub fn score_profile(&self, profile: &ProfileInput) -> Result<RiskBreakdown> {
        self.score(&profile.to_record()?)
    }

    /// Scores `base` and `base` with `changes` applied. Fields set in `changes`
    /// that differ from `base` must be modifiable unless `allow_any` is set.
    pub fn whatif(&self, base: &SubjectRecord, changes: &ProfileInput, allow_any: bool) -> Result<WhatIf> {
        if !allow_any {
            for field in changes.changed_fields(base) {
                if !self.is_modifiable(field) {
                    return Err(Error::NotModifiable(field.to_string()));
                }
            }
        }
        let before = self.score(base)?;
        let after = self.score(&changes.apply_to(base))?;
        let delta = after.total_risk - before.total_risk;
        Ok(WhatIf { before, after, delta })
    }
}

/// Mean engine risk over a feature sample, for checking a calibration on
/// a fresh reference cohort.
pub fn mean_risk(model: &PublishedModel, records: &[SubjectRecord]) -> f64 {
    records.iter().map(|r| model.risk_from_lp(model.linear_predictor(r))).sum::<f64>() / records.len() as f64
}

/// The ethnicity value that switches on a given indicator column.
pub fn ethnicity_for_column(column: &str) -> Option<Ethnicity> {
    match column {
        "ethnicity_asian" => Some(Ethnicity::Asian),
        "ethnicity_black" => Some(Ethnicity::Black),
        _ => None,
    }
}

#[cfg(test)]
mod tests;
