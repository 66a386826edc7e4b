use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ethnicity {
    /// White or any other non-Asian, non-Black background. Contributes no indicator column.
    Reference,
    Asian,
    Black,
}

impl Ethnicity {
    pub fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "reference" | "white" | "other" | "white/other" => Some(Ethnicity::Reference),
            "asian" => Some(Ethnicity::Asian),
            "black" => Some(Ethnicity::Black),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ethnicity::Reference => "reference",
            Ethnicity::Asian => "asian",
            Ethnicity::Black => "black",
        }
    }
}

/// Raw questionnaire answers for one participant.
///
/// `daytime_dozing` is the item tabulated as "Narcolepsy" in the source cohort
/// tables; at roughly 24% prevalence it is daytime dozing, not the clinical diagnosis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectRecord {
    pub age: u32,
    pub waist_hip_ratio: f64,
    pub bmi: f64,
    pub ethnicity: Ethnicity,
    pub degree: bool,
    /// Ever diagnosed heart attack, angina, stroke or high blood pressure.
    pub cvd_diagnosis: bool,
    pub cholesterol_meds: bool,
    /// Other prescription medication, excluding diabetes, cholesterol and blood pressure drugs.
    pub other_meds: bool,
    pub stomach_pain: bool,
    pub daytime_dozing: bool,
    pub breathless_level_ground: bool,
    pub diabetes_father: bool,
    pub diabetes_mother: bool,
    pub diabetes_siblings: bool,
    pub alcohol_monthly_plus: bool,
    pub currently_smoking: bool,
    /// Former smoker. Kept in the schema but not a model term; `None` when not recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_smoker: Option<bool>,
    pub pack_years: f64,
    pub good_health: bool,
}

impl SubjectRecord {
    /// A subject with every indicator off and the given continuous values.
    pub fn reference(age: u32, waist_hip_ratio: f64, bmi: f64, pack_years: f64) -> Self {
        SubjectRecord {
            age,
            waist_hip_ratio,
            bmi,
            ethnicity: Ethnicity::Reference,
            degree: false,
            cvd_diagnosis: false,
            cholesterol_meds: false,
            other_meds: false,
            stomach_pain: false,
            daytime_dozing: false,
            breathless_level_ground: false,
            diabetes_father: false,
            diabetes_mother: false,
            diabetes_siblings: false,
            alcohol_monthly_plus: false,
            currently_smoking: false,
            previous_smoker: None,
            pack_years,
            good_health: false,
        }
    }

    pub fn never_smoked(&self) -> bool {
        !self.currently_smoking && self.previous_smoker == Some(false)
    }

    /// Range and consistency checks. Returns `OutOfRange` naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Error::OutOfRange {
            field: field.to_string(),
            message,
        };
        if self.age < 18 {
            return Err(bad("age", format!("{} is below 18", self.age)));
        }
        if !(self.waist_hip_ratio.is_finite() && self.waist_hip_ratio > 0.0) {
            return Err(bad(
                "waist_hip_ratio",
                format!("{} is not positive", self.waist_hip_ratio),
            ));
        }
        if !(self.bmi.is_finite() && self.bmi > 0.0) {
            return Err(bad("bmi", format!("{} is not positive", self.bmi)));
        }
        if !(self.pack_years.is_finite() && self.pack_years >= 0.0) {
            return Err(bad(
                "pack_years",
                format!("{} is negative", self.pack_years),
            ));
        }
        if self.never_smoked() && self.pack_years != 0.0 {
            return Err(bad(
                "pack_years",
                "must be 0 for a subject who never smoked".to_string(),
            ));
        }
        if self.currently_smoking && self.previous_smoker == Some(true) {
            return Err(bad(
                "previous_smoker",
                "cannot be set together with currently_smoking".to_string(),
            ));
        }
        Ok(())
    }
}

/// Survival outcome measured from enrollment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Years since enrollment.
    pub time: f64,
    /// Incident type 2 diabetes. Death, loss to follow-up and study end are all censoring.
    pub event: bool,
}

impl Outcome {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::InvalidRecord(format!(
                "outcome time must be positive, got {time}"
            )));
        }
        Ok(Outcome { time, event })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub record: SubjectRecord,
    pub outcome: Outcome,
}
