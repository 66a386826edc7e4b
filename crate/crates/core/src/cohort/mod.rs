//! Subject records, outcome encoding, design-matrix construction and splitting.

mod io;
mod record;
mod split;

pub use io::{ingest_csv, ingest_reader, write_csv, Ingested, STUDY_END};
pub use record::{Ethnicity, Outcome, Subject, SubjectRecord};
pub use split::{kfold_assignments, stratified_split, stratified_split_indices};

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Indicator,
}

#[derive(Debug, Clone, Copy)]
pub struct ColumnSpec {
    pub name: &'static str,
    /// Source field; the ethnicity indicators share one group and are eliminated together.
    pub group: &'static str,
    pub kind: ColumnKind,
}

const fn col(name: &'static str, group: &'static str, kind: ColumnKind) -> ColumnSpec {
    ColumnSpec { name, group, kind }
}

use ColumnKind::{Continuous, Indicator};

/// The 19 terms of the reduced model, in design-matrix order.
pub const MODEL_COLUMNS: [ColumnSpec; 19] = [
    col("age", "age", Continuous),
    col("waist_hip_ratio", "waist_hip_ratio", Continuous),
    col("bmi", "bmi", Continuous),
    col("ethnicity_asian", "ethnicity", Indicator),
    col("ethnicity_black", "ethnicity", Indicator),
    col("degree", "degree", Indicator),
    col("cvd_diagnosis", "cvd_diagnosis", Indicator),
    col("cholesterol_meds", "cholesterol_meds", Indicator),
    col("other_meds", "other_meds", Indicator),
    col("stomach_pain", "stomach_pain", Indicator),
    col("daytime_dozing", "daytime_dozing", Indicator),
    col("breathless_level_ground", "breathless_level_ground", Indicator),
    col("diabetes_father", "diabetes_father", Indicator),
    col("diabetes_mother", "diabetes_mother", Indicator),
    col("diabetes_siblings", "diabetes_siblings", Indicator),
    col("alcohol_monthly_plus", "alcohol_monthly_plus", Indicator),
    col("currently_smoking", "currently_smoking", Indicator),
    col("pack_years", "pack_years", Continuous),
    col("good_health", "good_health", Indicator),
];

pub fn model_column_index(name: &str) -> Option<usize> {
    MODEL_COLUMNS.iter().position(|c| c.name == name)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl SubjectRecord {
    /// Unstandardized design row in [`MODEL_COLUMNS`] order.
    pub fn encode_raw(&self) -> [f64; 19] {
        [
            self.age as f64,
            self.waist_hip_ratio,
            self.bmi,
            flag(self.ethnicity == Ethnicity::Asian),
            flag(self.ethnicity == Ethnicity::Black),
            flag(self.degree),
            flag(self.cvd_diagnosis),
            flag(self.cholesterol_meds),
            flag(self.other_meds),
            flag(self.stomach_pain),
            flag(self.daytime_dozing),
            flag(self.breathless_level_ground),
            flag(self.diabetes_father),
            flag(self.diabetes_mother),
            flag(self.diabetes_siblings),
            flag(self.alcohol_monthly_plus),
            flag(self.currently_smoking),
            self.pack_years,
            flag(self.good_health),
        ]
    }
}

/// Indicator part of a design row, decoded back into record terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedIndicators {
    pub ethnicity: Ethnicity,
    /// `(column name, value)` for every non-ethnicity indicator column.
    pub flags: Vec<(&'static str, bool)>,
}

pub fn decode_indicators(row: &[f64]) -> Result<DecodedIndicators> {
    if row.len() != MODEL_COLUMNS.len() {
        return Err(Error::DimensionMismatch {
            expected: MODEL_COLUMNS.len(),
            got: row.len(),
        });
    }
    let as_bool = |v: f64, name: &str| -> Result<bool> {
        if v == 0.0 {
            Ok(false)
        } else if v == 1.0 {
            Ok(true)
        } else {
            Err(Error::InvalidRecord(format!("{name} = {v} is not 0/1")))
        }
    };
    let asian = as_bool(row[3], "ethnicity_asian")?;
    let black = as_bool(row[4], "ethnicity_black")?;
    let ethnicity = match (asian, black) {
        (false, false) => Ethnicity::Reference,
        (true, false) => Ethnicity::Asian,
        (false, true) => Ethnicity::Black,
        (true, true) => {
            return Err(Error::InvalidRecord(
                "both ethnicity indicators set".to_string(),
            ))
        }
    };
    let mut flags = Vec::new();
    for (j, column) in MODEL_COLUMNS.iter().enumerate() {
        if column.kind == ColumnKind::Indicator && column.group != "ethnicity" {
            flags.push((column.name, as_bool(row[j], column.name)?));
        }
    }
    Ok(DecodedIndicators { ethnicity, flags })
}

/// Affine map `z = (x - center) / scale` for one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub center: f64,
    pub scale: f64,
}

impl ColumnTransform {
    pub const IDENTITY: ColumnTransform = ColumnTransform {
        center: 0.0,
        scale: 1.0,
    };

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.center) / self.scale
    }
}

/// Per-column transforms; indicator columns always carry the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub columns: Vec<ColumnTransform>,
}

impl Standardization {
    pub fn identity(p: usize) -> Self {
        Standardization {
            columns: vec![ColumnTransform::IDENTITY; p],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.columns.iter().all(|c| *c == ColumnTransform::IDENTITY)
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (x, t) in row.iter_mut().zip(&self.columns) {
            *x = t.apply(*x);
        }
    }
}

/// Numeric design matrix with per-row survival outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCohort {
    pub feature_names: Vec<String>,
    /// Elimination group per column.
    pub groups: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub matrix: Array2<f64>,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    /// Transform already applied to `matrix`.
    pub standardization: Standardization,
}

impl EncodedCohort {
    /// Generic constructor: every column is its own group and treated as an indicator
    /// (never rescaled). Use [`EncodedCohort::with_kinds`] to mark continuous columns.
    pub fn new(
        feature_names: Vec<String>,
        matrix: Array2<f64>,
        times: Vec<f64>,
        events: Vec<bool>,
    ) -> Result<Self> {
        let (n, p) = matrix.dim();
        if feature_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: feature_names.len(),
            });
        }
        if times.len() != n || events.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: times.len().min(events.len()),
            });
        }
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidRecord(format!(
                "survival time must be positive, got {t}"
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(
                "design matrix contains non-finite values".to_string(),
            ));
        }
        Ok(EncodedCohort {
            groups: feature_names.clone(),
            kinds: vec![ColumnKind::Indicator; p],
            feature_names,
            matrix,
            times,
            events,
            standardization: Standardization::identity(p),
        })
    }

    pub fn with_kinds(mut self, kinds: Vec<ColumnKind>) -> Result<Self> {
        if kinds.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: kinds.len(),
            });
        }
        self.kinds = kinds;
        Ok(self)
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        if groups.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: groups.len(),
            });
        }
        self.groups = groups;
        Ok(self)
    }

    /// Unstandardized design for the 19 model terms, rows in input order.
    pub fn from_subjects(subjects: &[Subject]) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::EmptyCohort);
        }
        let p = MODEL_COLUMNS.len();
        let mut data = Vec::with_capacity(subjects.len() * p);
        for s in subjects {
            data.extend_from_slice(&s.record.encode_raw());
        }
        let matrix = Array2::from_shape_vec((subjects.len(), p), data)
            .expect("row-major buffer has n * p entries");
        let times = subjects.iter().map(|s| s.outcome.time).collect();
        let events = subjects.iter().map(|s| s.outcome.event).collect();
        let names = MODEL_COLUMNS.iter().map(|c| c.name.to_string()).collect();
        let cohort = EncodedCohort::new(names, matrix, times, events)?
            .with_kinds(MODEL_COLUMNS.iter().map(|c| c.kind).collect())?
            .with_groups(MODEL_COLUMNS.iter().map(|c| c.group.to_string()).collect())?;
        Ok(cohort)
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn p(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|e| **e).count()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(i)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Distinct groups in first-appearance order, each with its column indices.
    pub fn feature_groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for (j, g) in self.groups.iter().enumerate() {
            match out.iter_mut().find(|(name, _)| name == g) {
                Some((_, cols)) => cols.push(j),
                None => out.push((g.clone(), vec![j])),
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> EncodedCohort {
        EncodedCohort {
            feature_names: self.feature_names.clone(),
            groups: self.groups.clone(),
            kinds: self.kinds.clone(),
            matrix: self.matrix.select(Axis(0), rows),
            times: rows.iter().map(|&i| self.times[i]).collect(),
            events: rows.iter().map(|&i| self.events[i]).collect(),
            standardization: self.standardization.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> EncodedCohort {
        let pick = |v: &Vec<String>| cols.iter().map(|&j| v[j].clone()).collect::<Vec<_>>();
        EncodedCohort {
            feature_names: pick(&self.feature_names),
            groups: pick(&self.groups),
            kinds: cols.iter().map(|&j| self.kinds[j]).collect(),
            matrix: self.matrix.select(Axis(1), cols),
            times: self.times.clone(),
            events: self.events.clone(),
            standardization: Standardization {
                columns: cols
                    .iter()
                    .map(|&j| self.standardization.columns[j])
                    .collect(),
            },
        }
    }

    /// Center/scale from this cohort's continuous columns (sample SD, n - 1).
    ///
    /// Statistics are taken on the values as currently stored, so call this on an
    /// unstandardized cohort.
    pub fn fit_standardization(&self) -> Result<Standardization> {
        let n = self.n();
        if n < 2 {
            return Err(Error::EmptyCohort);
        }
        let mut columns = Vec::with_capacity(self.p());
        for (j, kind) in self.kinds.iter().enumerate() {
            if *kind == ColumnKind::Indicator {
                columns.push(ColumnTransform::IDENTITY);
                continue;
            }
            let col = self.matrix.column(j);
            let mean = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|x| (x - mean) * (x - mean)).sum();
            let sd = (ss / (n - 1) as f64).sqrt();
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::ZeroVariance(self.feature_names[j].clone()));
            }
            columns.push(ColumnTransform {
                center: mean,
                scale: sd,
            });
        }
        Ok(Standardization { columns })
    }

    /// Applies `s` to an unstandardized cohort and records it.
    pub fn standardized(mut self, s: &Standardization) -> Result<Self> {
        if s.columns.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: s.columns.len(),
            });
        }
        if !self.standardization.is_identity() {
            return Err(Error::InvalidArgument(
                "cohort is already standardized".to_string(),
            ));
        }
        for (j, t) in s.columns.iter().enumerate() {
            if *t != ColumnTransform::IDENTITY {
                self.matrix.column_mut(j).mapv_inplace(|x| t.apply(x));
            }
        }
        self.standardization = s.clone();
        Ok(self)
    }
}

/// Encodes records and standardizes continuous columns with their own statistics.
pub fn encode(subjects: &[Subject]) -> Result<EncodedCohort> {
    let raw = EncodedCohort::from_subjects(subjects)?;
    let s = raw.fit_standardization()?;
    raw.standardized(&s)
}
