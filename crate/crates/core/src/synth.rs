//! Synthetic cohorts drawn from published marginals, with event times from a
//! ground-truth Cox model under a constant baseline hazard.
//!
//! Features are sampled independently of each other. Continuous features are
//! log-normal, matched to a median and interquartile range. Pack-years is zero
//! for never-smokers and log-normal for ever-smokers.
//!
//! Generation is chunked: chunk `k` draws features from ChaCha stream `2k` and
//! outcomes from stream `2k + 1` of the configured seed, so output is identical
//! however the chunks are scheduled.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{
    ColumnKind, ColumnTransform, Ethnicity, Outcome, Standardization, Subject, SubjectRecord,
    MODEL_COLUMNS,
};
use crate::error::{Error, Result};
use crate::stats::{bisect, normal_quantile, UPPER_QUARTILE_Z};

const CHUNK: usize = 4096;

/// The twelve Bernoulli features configured through `prevalence`.
pub const BINARY_FEATURES: [&str; 12] = [
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
    "good_health",
];

/// `[Q1, median, Q3]` of a positive, right-skewed quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub const fn new(q1: f64, median: f64, q3: f64) -> Self {
        Quartiles { q1, median, q3 }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = self.q1.is_finite() && self.q3.is_finite() && self.q1 <= self.median && self.median <= self.q3;
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "{what}: quartiles must satisfy Q1 <= median <= Q3, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Log-normal with parameters of the underlying normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormal {
    /// Matches the median exactly and the interquartile range exactly:
    /// `median * (e^{z sigma} - e^{-z sigma}) = Q3 - Q1`.
    pub fn from_median_iqr(q: &Quartiles) -> Result<Self> {
        q.validate("log-normal")?;
        if q.median <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "log-normal needs a positive median, got {}",
                q.median
            )));
        }
        let iqr = q.q3 - q.q1;
        let sigma = (iqr / (2.0 * q.median)).asinh() / UPPER_QUARTILE_Z;
        Ok(LogNormal {
            mu: q.median.ln(),
            sigma,
        })
    }

    pub fn median(&self) -> f64 {
        self.mu.exp()
    }

    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        (s2.exp() - 1.0) * (2.0 * self.mu + s2).exp()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        (self.mu + self.sigma * normal_quantile(p)).exp()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mu + self.sigma * z).exp()
    }
}

/// Smoking status and exposure. Never-smokers have zero pack-years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmokingSpec {
    /// P(currently smoking).
    pub current: f64,
    /// P(former smoker).
    pub previous: f64,
    /// Median pack-years among ever-smokers.
    pub pack_years_median: f64,
    /// Log-scale SD of pack-years among ever-smokers.
    pub pack_years_sigma: f64,
}

impl SmokingSpec {
    /// Picks the ever-smoker median so the overall upper quartile equals `q3`.
    pub fn from_upper_quartile(current: f64, previous: f64, q3: f64, sigma: f64) -> Result<Self> {
        let ever = current + previous;
        if !(ever > 0.25 && ever <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ever-smoker share {ever} leaves the upper quartile at zero"
            )));
        }
        let p = (0.75 - (1.0 - ever)) / ever;
        let median = q3 / (sigma * normal_quantile(p)).exp();
        Ok(SmokingSpec {
            current,
            previous,
            pack_years_median: median,
            pack_years_sigma: sigma,
        })
    }

    fn ever(&self) -> f64 {
        self.current + self.previous
    }

    fn positive(&self) -> LogNormal {
        LogNormal {
            mu: self.pack_years_median.ln(),
            sigma: self.pack_years_sigma,
        }
    }

    /// Mean and variance of the zero-inflated pack-years distribution.
    pub fn pack_years_moments(&self) -> (f64, f64) {
        let ln = self.positive();
        let w = self.ever();
        let mean = w * ln.mean();
        let second = w * (ln.variance() + ln.mean() * ln.mean());
        (mean, second - mean * mean)
    }

    /// Overall pack-years quantile.
    pub fn pack_years_quantile(&self, p: f64) -> f64 {
        let zero = 1.0 - self.ever();
        if p <= zero {
            0.0
        } else {
            self.positive().quantile((p - zero) / self.ever())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EthnicitySpec {
    pub asian: f64,
    pub black: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousMarginals {
    pub age: Quartiles,
    pub waist_hip_ratio: Quartiles,
    pub bmi: Quartiles,
}

/// Constant baseline hazard, either given directly or solved from a risk target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum BaselineSpec {
    /// Events per person-year at the reference linear predictor.
    Rate { rate: f64 },
    /// Mean risk by `horizon` years over the generated cohort.
    Target { target_risk: f64, horizon: f64 },
}

/// Distribution of censoring times, matched to follow-up quartiles with a
/// two-piece normal (separate spreads below and above the median).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Followup {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Followup {
    /// Smallest censoring time ever drawn.
    pub const MIN_TIME: f64 = 1e-3;

    fn validate(&self) -> Result<()> {
        Quartiles::new(self.q1, self.median, self.q3).validate("followup")?;
        if self.median <= 0.0 {
            return Err(Error::InvalidConfig("followup median must be positive".into()));
        }
        Ok(())
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let z = normal_quantile(p);
        self.from_z(z)
    }

    fn from_z(&self, z: f64) -> f64 {
        let spread = if z < 0.0 {
            (self.median - self.q1) / UPPER_QUARTILE_Z
        } else {
            (self.q3 - self.median) / UPPER_QUARTILE_Z
        };
        (self.median + z * spread).max(Self::MIN_TIME)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.from_z(rng.sample(StandardNormal))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    pub continuous: ContinuousMarginals,
    pub ethnicity: EthnicitySpec,
    pub smoking: SmokingSpec,
    /// Bernoulli prevalence keyed by field name; see [`BINARY_FEATURES`].
    pub prevalence: BTreeMap<String, f64>,
    /// Ground-truth log hazard ratios keyed by design column name, on the
    /// standardized scale of [`GeneratorConfig::truth_standardization`].
    pub coefficients: BTreeMap<String, f64>,
    pub baseline: BaselineSpec,
    pub followup: Followup,
}

fn check_prob(what: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("{what}: probability {p} outside [0, 1]")));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: GeneratorConfig =
            toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.continuous.age.validate("age")?;
        self.continuous.waist_hip_ratio.validate("waist_hip_ratio")?;
        self.continuous.bmi.validate("bmi")?;
        for q in [&self.continuous.age, &self.continuous.waist_hip_ratio, &self.continuous.bmi] {
            if q.median <= 0.0 {
                return Err(Error::InvalidConfig("continuous medians must be positive".into()));
            }
        }
        check_prob("ethnicity.asian", self.ethnicity.asian)?;
        check_prob("ethnicity.black", self.ethnicity.black)?;
        check_prob("ethnicity total", self.ethnicity.asian + self.ethnicity.black)?;
        check_prob("smoking.current", self.smoking.current)?;
        check_prob("smoking.previous", self.smoking.previous)?;
        check_prob("smoking total", self.smoking.ever())?;
        if !(self.smoking.pack_years_median > 0.0 && self.smoking.pack_years_sigma >= 0.0) {
            return Err(Error::InvalidConfig(
                "pack-years median must be positive and sigma non-negative".into(),
            ));
        }
        for name in BINARY_FEATURES {
            match self.prevalence.get(name) {
                Some(p) => check_prob(name, *p)?,
                None => return Err(Error::InvalidConfig(format!("missing prevalence for `{name}`"))),
            }
        }
        if let Some(k) = self.prevalence.keys().find(|k| !BINARY_FEATURES.contains(&k.as_str())) {
            return Err(Error::InvalidConfig(format!("unknown prevalence key `{k}`")));
        }
        for c in MODEL_COLUMNS {
            match self.coefficients.get(c.name) {
                Some(b) if b.is_finite() => {}
                Some(b) => return Err(Error::InvalidConfig(format!("coefficient `{}` = {b}", c.name))),
                None => return Err(Error::InvalidConfig(format!("missing coefficient `{}`", c.name))),
            }
        }
        if let Some(k) = self.coefficients.keys().find(|k| MODEL_COLUMNS.iter().all(|c| c.name != *k)) {
            return Err(Error::InvalidConfig(format!("unknown coefficient `{k}`")));
        }
        match self.baseline {
            BaselineSpec::Rate { rate } if !(rate > 0.0 && rate.is_finite()) => {
                return Err(Error::InvalidConfig(format!("baseline rate must be positive, got {rate}")))
            }
            BaselineSpec::Target { target_risk, horizon }
                if !(target_risk > 0.0 && target_risk < 1.0 && horizon > 0.0) =>
            {
                return Err(Error::InvalidConfig(format!(
                    "baseline target must satisfy 0 < risk < 1 and horizon > 0, got {target_risk} at {horizon}"
                )))
            }
            _ => {}
        }
        self.followup.validate()
    }

    pub fn coefficient_vector(&self) -> [f64; 19] {
        let mut beta = [0.0; 19];
        for (j, c) in MODEL_COLUMNS.iter().enumerate() {
            beta[j] = self.coefficients.get(c.name).copied().unwrap_or(0.0);
        }
        beta
    }

    /// Population-level z-scoring of the continuous columns: centers at the
    /// configured medians, scales at the standard deviation of the sampling
    /// distribution.
    pub fn truth_standardization(&self) -> Result<Standardization> {
        let mut columns = vec![ColumnTransform::IDENTITY; MODEL_COLUMNS.len()];
        for (j, c) in MODEL_COLUMNS.iter().enumerate() {
            if c.kind != ColumnKind::Continuous {
                continue;
            }
            let (center, sd) = match c.name {
                "age" => lognormal_center_scale(&self.continuous.age)?,
                "waist_hip_ratio" => lognormal_center_scale(&self.continuous.waist_hip_ratio)?,
                "bmi" => lognormal_center_scale(&self.continuous.bmi)?,
                "pack_years" => (self.smoking.pack_years_quantile(0.5), self.smoking.pack_years_moments().1.sqrt()),
                other => unreachable!("unhandled continuous column {other}"),
            };
            if !(sd > 0.0) {
                return Err(Error::ZeroVariance(c.name.to_string()));
            }
            columns[j] = ColumnTransform { center, scale: sd };
        }
        Ok(Standardization { columns })
    }

    pub fn truth(&self) -> Result<TruthModel> {
        Ok(TruthModel {
            coefficients: self.coefficient_vector(),
            standardization: self.truth_standardization()?,
        })
    }
}

fn lognormal_center_scale(q: &Quartiles) -> Result<(f64, f64)> {
    let ln = LogNormal::from_median_iqr(q)?;
    Ok((ln.median(), ln.variance().sqrt()))
}

/// Generating Cox model: `eta = sum_j beta_j * z_j` on the standardized design.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthModel {
    pub coefficients: [f64; 19],
    pub standardization: Standardization,
}

impl TruthModel {
    pub fn linear_predictor(&self, record: &SubjectRecord) -> f64 {
        let mut row = record.encode_raw();
        self.standardization.apply_row(&mut row);
        row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum()
    }
}

fn chunk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_record<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &GeneratorConfig,
    ln: &[LogNormal; 3],
    prevalence: &[f64; 12],
) -> SubjectRecord {
    let age = ln[0].sample(rng).round().max(18.0) as u32;
    let waist_hip_ratio = ln[1].sample(rng);
    let bmi = ln[2].sample(rng);
    let u: f64 = rng.random();
    let ethnicity = if u < cfg.ethnicity.asian {
        Ethnicity::Asian
    } else if u < cfg.ethnicity.asian + cfg.ethnicity.black {
        Ethnicity::Black
    } else {
        Ethnicity::Reference
    };
    let mut flags = [false; 12];
    for (f, p) in flags.iter_mut().zip(prevalence) {
        *f = rng.random::<f64>() < *p;
    }
    let u: f64 = rng.random();
    let (currently_smoking, previous_smoker) = if u < cfg.smoking.current {
        (true, false)
    } else if u < cfg.smoking.ever() {
        (false, true)
    } else {
        (false, false)
    };
    let positive = cfg.smoking.positive().sample(rng);
    let pack_years = if currently_smoking || previous_smoker {
        positive
    } else {
        0.0
    };
    SubjectRecord {
        age,
        waist_hip_ratio,
        bmi,
        ethnicity,
        degree: flags[0],
        cvd_diagnosis: flags[1],
        cholesterol_meds: flags[2],
        other_meds: flags[3],
        stomach_pain: flags[4],
        daytime_dozing: flags[5],
        breathless_level_ground: flags[6],
        diabetes_father: flags[7],
        diabetes_mother: flags[8],
        diabetes_siblings: flags[9],
        alcohol_monthly_plus: flags[10],
        currently_smoking,
        previous_smoker: Some(previous_smoker),
        pack_years,
        good_health: flags[11],
    }
}

/// Draws `config.n` records from the configured marginals.
pub fn sample_features(config: &GeneratorConfig) -> Result<Vec<SubjectRecord>> {
    config.validate()?;
    let ln = [
        LogNormal::from_median_iqr(&config.continuous.age)?,
        LogNormal::from_median_iqr(&config.continuous.waist_hip_ratio)?,
        LogNormal::from_median_iqr(&config.continuous.bmi)?,
    ];
    let mut prevalence = [0.0; 12];
    for (p, name) in prevalence.iter_mut().zip(BINARY_FEATURES) {
        *p = config.prevalence[name];
    }
    let n = config.n;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<SubjectRecord>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = chunk_rng(config.seed, 2 * k as u64);
            let len = CHUNK.min(n - k * CHUNK);
            (0..len)
                .map(|_| sample_record(&mut rng, config, &ln, &prevalence))
                .collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

/// Unobserved event and censoring times behind an [`Outcome`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentTimes {
    pub event_time: f64,
    pub censor_time: f64,
}

impl LatentTimes {
    pub fn observed(&self) -> Outcome {
        let event = self.event_time <= self.censor_time;
        Outcome {
            time: if event { self.event_time } else { self.censor_time },
            event,
        }
    }
}

/// Inverse-transform event times `T = -ln U / (rate * e^eta)` and independent
/// censoring times, one chunked stream per [`CHUNK`] rows.
pub fn sample_latent(
    linear_predictors: &[f64],
    baseline_rate: f64,
    followup: &Followup,
    seed: u64,
) -> Result<Vec<LatentTimes>> {
    if !(baseline_rate >= 0.0 && baseline_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!("baseline rate {baseline_rate}")));
    }
    followup.validate()?;
    let n = linear_predictors.len();
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<LatentTimes>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = chunk_rng(seed, 2 * k as u64 + 1);
            linear_predictors[k * CHUNK..(n.min((k + 1) * CHUNK))]
                .iter()
                .map(|eta| {
                    // (0, 1]: avoids ln 0
                    let u = 1.0 - rng.random::<f64>();
                    let hazard = baseline_rate * eta.exp();
                    let event_time = if hazard > 0.0 { -u.ln() / hazard } else { f64::INFINITY };
                    let censor_time = followup.sample(&mut rng);
                    LatentTimes {
                        // a zero-time event would be unobservable; U = 1 is measure zero anyway
                        event_time: event_time.max(f64::MIN_POSITIVE),
                        censor_time,
                    }
                })
                .collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

pub fn sample_outcomes(
    records: &[SubjectRecord],
    truth: &TruthModel,
    baseline_rate: f64,
    followup: &Followup,
    seed: u64,
) -> Result<Vec<Outcome>> {
    let etas: Vec<f64> = records.iter().map(|r| truth.linear_predictor(r)).collect();
    Ok(sample_latent(&etas, baseline_rate, followup, seed)?
        .iter()
        .map(LatentTimes::observed)
        .collect())
}

/// Constant baseline rate at which the mean of `1 - exp(-rate * horizon * e^eta)`
/// over `linear_predictors` equals `target_risk`.
pub fn solve_baseline_rate(linear_predictors: &[f64], target_risk: f64, horizon: f64) -> Result<f64> {
    if linear_predictors.is_empty() {
        return Err(Error::EmptyCohort);
    }
    if !(target_risk > 0.0 && target_risk < 1.0 && horizon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "target risk {target_risk} at horizon {horizon}"
        )));
    }
    let rel: Vec<f64> = linear_predictors.iter().map(|e| e.exp()).collect();
    let mean_risk = |log_rate: f64| {
        let h = log_rate.exp() * horizon;
        rel.iter().map(|r| -(-h * r).exp_m1()).sum::<f64>() / rel.len() as f64
    };
    let log_rate = bisect(|lr| mean_risk(lr) - target_risk, -40.0, 10.0, 1e-13, 200)
        .ok_or_else(|| Error::InvalidConfig(format!("cannot reach mean risk {target_risk}")))?;
    Ok(log_rate.exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub subjects: Vec<Subject>,
    pub baseline_rate: f64,
    pub truth: TruthModel,
}

/// Features, then baseline (solved if needed), then outcomes.
pub fn generate(config: &GeneratorConfig) -> Result<SyntheticCohort> {
    if config.n == 0 {
        return Err(Error::InvalidConfig("cohort size must be positive".into()));
    }
    let records = sample_features(config)?;
    let truth = config.truth()?;
    let etas: Vec<f64> = records.iter().map(|r| truth.linear_predictor(r)).collect();
    let baseline_rate = match config.baseline {
        BaselineSpec::Rate { rate } => rate,
        BaselineSpec::Target { target_risk, horizon } => solve_baseline_rate(&etas, target_risk, horizon)?,
    };
    let latent = sample_latent(&etas, baseline_rate, &config.followup, config.seed)?;
    let subjects = records
        .into_iter()
        .zip(latent)
        .map(|(record, t)| Subject {
            record,
            outcome: t.observed(),
        })
        .collect();
    Ok(SyntheticCohort {
        subjects,
        baseline_rate,
        truth,
    })
}

/// Demographics and coefficients of the published reduced model.
///
/// Two parameters are not published and are assumptions of this preset: the
/// former-smoker share (0.3451, putting never-smokers at 55%) and the log-scale
/// spread of ever-smoker pack-years (1.0). The published "previous smoker" share
/// of 10.49% is used as the current-smoker prevalence, the smoking term of the model.
pub fn paper_preset() -> GeneratorConfig {
    let prevalence = [
        ("degree", 0.3255),
        ("cvd_diagnosis", 0.2780),
        ("cholesterol_meds", 0.1413),
        ("other_meds", 0.4513),
        ("stomach_pain", 0.0864),
        ("daytime_dozing", 0.2372),
        ("breathless_level_ground", 0.0350),
        ("diabetes_father", 0.0843),
        ("diabetes_mother", 0.0867),
        ("diabetes_siblings", 0.0644),
        ("alcohol_monthly_plus", 0.8108),
        ("good_health", 0.7587),
    ];
    let coefficients = [
        ("age", 0.242),
        ("waist_hip_ratio", 0.440),
        ("bmi", 0.399),
        ("ethnicity_asian", 0.844),
        ("ethnicity_black", 0.532),
        ("degree", -0.217),
        ("cvd_diagnosis", 0.368),
        ("cholesterol_meds", 0.285),
        ("other_meds", 0.250),
        ("stomach_pain", 0.177),
        ("daytime_dozing", 0.176),
        ("breathless_level_ground", 0.031),
        ("diabetes_father", 0.385),
        ("diabetes_mother", 0.489),
        ("diabetes_siblings", 0.422),
        ("alcohol_monthly_plus", -0.375),
        ("currently_smoking", 0.278),
        ("pack_years", 0.086),
        ("good_health", -0.323),
    ];
    GeneratorConfig {
        n: 472_830,
        seed: 20_201_130,
        continuous: ContinuousMarginals {
            age: Quartiles::new(50.0, 58.0, 63.0),
            waist_hip_ratio: Quartiles::new(0.80, 0.87, 0.93),
            bmi: Quartiles::new(24.03, 26.57, 29.64),
        },
        ethnicity: EthnicitySpec {
            asian: 0.0200,
            black: 0.0149,
        },
        smoking: SmokingSpec::from_upper_quartile(0.1049, 0.3451, 6.5, 1.0)
            .expect("preset smoking shares are valid"),
        prevalence: prevalence.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        coefficients: coefficients.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        // full-follow-up incidence, read as risk by the median follow-up time
        baseline: BaselineSpec::Target {
            target_risk: 0.0403,
            horizon: 11.2,
        },
        followup: Followup {
            q1: 10.8,
            median: 11.2,
            q3: 12.3,
        },
    }
}
