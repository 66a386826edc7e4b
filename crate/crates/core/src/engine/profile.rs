//! Partially specified subject records for scoring requests.

use serde::{Deserialize, Serialize};

use crate::cohort::{Ethnicity, SubjectRecord};
use crate::error::{Error, Result};

macro_rules! profile {
    ($($field:ident: $ty:ty),* $(,)?) => {
        /// A [`SubjectRecord`] whose fields may each be absent. Used for
        /// requests, where a missing answer must be reported by name, and
        /// as a patch in what-if requests.
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct ProfileInput {
            $(
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub previous_smoker: Option<bool>,
        }

        /// Every accepted field name, required ones first.
        pub const PROFILE_FIELDS: &[&str] = &[$(stringify!($field),)* "previous_smoker"];

        impl ProfileInput {
            /// Complete record, or `MissingFields` naming every absent required field.
            pub fn to_record(&self) -> Result<SubjectRecord> {
                let mut missing = Vec::new();
                $(
                    if self.$field.is_none() {
                        missing.push(stringify!($field).to_string());
                    }
                )*
                if !missing.is_empty() {
                    return Err(Error::MissingFields(missing));
                }
                Ok(SubjectRecord {
                    $($field: self.$field.clone().expect("checked above"),)*
                    previous_smoker: self.previous_smoker,
                })
            }

            /// `base` with every present field replaced.
            pub fn apply_to(&self, base: &SubjectRecord) -> SubjectRecord {
                let mut out = base.clone();
                $(
                    if let Some(v) = &self.$field {
                        out.$field = v.clone();
                    }
                )*
                if self.previous_smoker.is_some() {
                    out.previous_smoker = self.previous_smoker;
                }
                out
            }

            /// Names of present fields whose value differs from `base`.
            pub fn changed_fields(&self, base: &SubjectRecord) -> Vec<&'static str> {
                let mut out = Vec::new();
                $(
                    if self.$field.as_ref().is_some_and(|v| *v != base.$field) {
                        out.push(stringify!($field));
                    }
                )*
                if self.previous_smoker.is_some() && self.previous_smoker != base.previous_smoker {
                    out.push("previous_smoker");
                }
                out
            }

            pub fn is_empty(&self) -> bool {
                *self == ProfileInput::default()
            }
        }

        impl From<&SubjectRecord> for ProfileInput {
            fn from(r: &SubjectRecord) -> Self {
                ProfileInput {
                    $($field: Some(r.$field.clone()),)*
                    previous_smoker: r.previous_smoker,
                }
            }
        }
    };
}

profile! {
    age: u32,
    waist_hip_ratio: f64,
    bmi: f64,
    ethnicity: Ethnicity,
    degree: bool,
    cvd_diagnosis: bool,
    cholesterol_meds: bool,
    other_meds: bool,
    stomach_pain: bool,
    daytime_dozing: bool,
    breathless_level_ground: bool,
    diabetes_father: bool,
    diabetes_mother: bool,
    diabetes_siblings: bool,
    alcohol_monthly_plus: bool,
    currently_smoking: bool,
    pack_years: f64,
    good_health: bool,
}
