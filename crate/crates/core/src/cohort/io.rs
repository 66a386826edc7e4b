//! Cohort CSV format: one row per subject, snake_case field names as headers.
//!
//! Outcome columns are either `time,event` (years, 0/1) or
//! `enrollment_date,exit_date,event` with ISO-8601 dates. `previous_smoker` is optional.

use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;

use super::{Ethnicity, Outcome, Subject, SubjectRecord};
use crate::error::{Error, Result};

/// Administrative end of follow-up; later exits are censored here.
pub const STUDY_END: NaiveDate = match NaiveDate::from_ymd_opt(2020, 9, 30) {
    Some(d) => d,
    None => panic!("valid date"),
};

const DAYS_PER_YEAR: f64 = 365.25;

const FEATURE_COLUMNS: [&str; 19] = [
    "age",
    "waist_hip_ratio",
    "bmi",
    "ethnicity",
    "degree",
    "cvd_diagnosis",
    "cholesterol_meds",
    "other_meds",
    "stomach_pain",
    "daytime_dozing",
    "breathless_level_ground",
    "diabetes_father",
    "diabetes_mother",
    "diabetes_siblings",
    "alcohol_monthly_plus",
    "currently_smoking",
    "pack_years",
    "good_health",
    "event",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub subjects: Vec<Subject>,
    /// Rows dropped because at least one cell was empty.
    pub excluded: usize,
    /// Rows whose exit date fell after [`STUDY_END`].
    pub censored_at_study_end: usize,
}

enum OutcomeColumns {
    Years { time: usize },
    Dates { exit: usize },
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na")
}

struct RowReader<'a> {
    row: usize,
    record: &'a csv::StringRecord,
    index: &'a HashMap<String, usize>,
}

impl RowReader<'_> {
    fn cell(&self, column: &str) -> &str {
        self.record.get(self.index[column]).unwrap_or("").trim()
    }

    fn malformed(&self, column: &str, message: impl Into<String>) -> Error {
        Error::Malformed {
            row: self.row,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn float(&self, column: &str) -> Result<f64> {
        let s = self.cell(column);
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.malformed(column, format!("`{s}` is not a number")))
    }

    fn boolean(&self, column: &str) -> Result<bool> {
        let s = self.cell(column);
        match s.to_ascii_lowercase().as_str() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            _ => Err(self.malformed(column, format!("`{s}` is not a boolean"))),
        }
    }

    fn date(&self, column: &str) -> Result<NaiveDate> {
        let s = self.cell(column);
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|e| self.malformed(column, format!("`{s}`: {e}")))
    }
}

/// Reads a cohort file, dropping rows with any missing cell.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Ingested> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file)
}

pub fn ingest_reader<R: std::io::Read>(reader: R) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    if index.len() != headers.len() {
        return Err(Error::Header("duplicate column names".to_string()));
    }

    let missing: Vec<&str> = FEATURE_COLUMNS
        .iter()
        .copied()
        .filter(|c| !index.contains_key(*c))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Header(format!("missing columns: {}", missing.join(", "))));
    }
    let outcome_cols = if let Some(&time) = index.get("time") {
        OutcomeColumns::Years { time }
    } else {
        match (index.get("enrollment_date"), index.get("exit_date")) {
            (Some(_), Some(&exit)) => OutcomeColumns::Dates { exit },
            _ => {
                return Err(Error::Header(
                    "need either `time` or both `enrollment_date` and `exit_date`".to_string(),
                ))
            }
        }
    };
    let mut known: Vec<&str> = FEATURE_COLUMNS.to_vec();
    known.extend(["time", "enrollment_date", "exit_date", "previous_smoker"]);
    if let Some(unknown) = headers.iter().find(|h| !known.contains(h)) {
        return Err(Error::Header(format!("unknown column `{unknown}`")));
    }

    let mut subjects = Vec::new();
    let mut excluded = 0;
    let mut censored_at_study_end = 0;
    for (k, rec) in rdr.records().enumerate() {
        // header is line 1
        let row = k + 2;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Malformed {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        if rec.iter().any(is_missing) {
            excluded += 1;
            continue;
        }
        let r = RowReader {
            row,
            record: &rec,
            index: &index,
        };
        let token = r.cell("ethnicity");
        let ethnicity = Ethnicity::parse(token).ok_or_else(|| Error::UnknownEthnicity {
            row,
            token: token.to_string(),
        })?;
        let age_f = r.float("age")?;
        if age_f.fract() != 0.0 || age_f < 0.0 {
            return Err(r.malformed("age", format!("`{age_f}` is not a whole number of years")));
        }
        let record = SubjectRecord {
            age: age_f as u32,
            waist_hip_ratio: r.float("waist_hip_ratio")?,
            bmi: r.float("bmi")?,
            ethnicity,
            degree: r.boolean("degree")?,
            cvd_diagnosis: r.boolean("cvd_diagnosis")?,
            cholesterol_meds: r.boolean("cholesterol_meds")?,
            other_meds: r.boolean("other_meds")?,
            stomach_pain: r.boolean("stomach_pain")?,
            daytime_dozing: r.boolean("daytime_dozing")?,
            breathless_level_ground: r.boolean("breathless_level_ground")?,
            diabetes_father: r.boolean("diabetes_father")?,
            diabetes_mother: r.boolean("diabetes_mother")?,
            diabetes_siblings: r.boolean("diabetes_siblings")?,
            alcohol_monthly_plus: r.boolean("alcohol_monthly_plus")?,
            currently_smoking: r.boolean("currently_smoking")?,
            previous_smoker: if index.contains_key("previous_smoker") {
                Some(r.boolean("previous_smoker")?)
            } else {
                None
            },
            pack_years: r.float("pack_years")?,
            good_health: r.boolean("good_health")?,
        };
        record.validate().map_err(|e| match e {
            Error::OutOfRange { field, message } => Error::Malformed {
                row,
                column: field,
                message,
            },
            other => other,
        })?;

        let mut event = r.boolean("event")?;
        let time = match outcome_cols {
            OutcomeColumns::Years { .. } => r.float("time")?,
            OutcomeColumns::Dates { .. } => {
                let start = r.date("enrollment_date")?;
                let mut exit = r.date("exit_date")?;
                if exit > STUDY_END {
                    exit = STUDY_END;
                    event = false;
                    censored_at_study_end += 1;
                }
                (exit - start).num_days() as f64 / DAYS_PER_YEAR
            }
        };
        let column = match outcome_cols {
            OutcomeColumns::Years { time } => headers.get(time),
            OutcomeColumns::Dates { exit, .. } => headers.get(exit),
        }
        .unwrap_or("time");
        let outcome = Outcome::new(time, event).map_err(|_| Error::Malformed {
            row,
            column: column.to_string(),
            message: format!("follow-up time {time} is not positive"),
        })?;
        subjects.push(Subject { record, outcome });
    }
    Ok(Ingested {
        subjects,
        excluded,
        censored_at_study_end,
    })
}

fn b(v: bool) -> &'static str {
    if v {
        "1"
    } else {
        "0"
    }
}

/// Writes subjects in the `time,event` form. Floats use shortest round-trip formatting.
pub fn write_csv<W: std::io::Write>(writer: W, subjects: &[Subject]) -> Result<()> {
    let with_previous = subjects.iter().any(|s| s.record.previous_smoker.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FEATURE_COLUMNS[..18].to_vec();
    if with_previous {
        header.push("previous_smoker");
    }
    header.extend(["time", "event"]);
    w.write_record(&header)?;
    for s in subjects {
        let r = &s.record;
        let mut row = vec![
            r.age.to_string(),
            r.waist_hip_ratio.to_string(),
            r.bmi.to_string(),
            r.ethnicity.as_str().to_string(),
        ];
        row.extend(
            [
                r.degree,
                r.cvd_diagnosis,
                r.cholesterol_meds,
                r.other_meds,
                r.stomach_pain,
                r.daytime_dozing,
                r.breathless_level_ground,
                r.diabetes_father,
                r.diabetes_mother,
                r.diabetes_siblings,
                r.alcohol_monthly_plus,
                r.currently_smoking,
            ]
            .iter()
            .map(|v| b(*v).to_string()),
        );
        row.push(r.pack_years.to_string());
        row.push(b(r.good_health).to_string());
        if with_previous {
            row.push(b(r.previous_smoker.unwrap_or(false)).to_string());
        }
        row.push(s.outcome.time.to_string());
        row.push(b(s.outcome.event).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
