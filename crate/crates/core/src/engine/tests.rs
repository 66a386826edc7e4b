use std::sync::OnceLock;

use proptest::prelude::*;

use super::*;
use crate::synth::GeneratorConfig;

fn model() -> &'static PublishedModel {
    static M: OnceLock<PublishedModel> = OnceLock::new();
    M.get_or_init(|| PublishedModel::build(&GeneratorConfig { n: 20_000, ..paper_preset() }, TARGET_MEAN_RISK).unwrap())
}

fn term<'a>(m: &'a PublishedModel, name: &str) -> &'a PublishedTerm {
    m.terms.iter().find(|t| t.name == name).unwrap()
}

fn centered(m: &PublishedModel) -> SubjectRecord {
    let c = |n: &str| term(m, n).center;
    SubjectRecord::reference(c("age").round() as u32, c("waist_hip_ratio"), c("bmi"), c("pack_years"))
}

#[test]
fn coefficients_are_the_published_values() {
    let m = model();
    assert_eq!(term(m, "ethnicity_asian").coefficient, 0.844);
    assert_eq!(term(m, "diabetes_mother").coefficient, 0.489);
    assert_eq!(term(m, "alcohol_monthly_plus").coefficient, -0.375);
    assert_eq!((term(m, "bmi").ci_low, term(m, "bmi").ci_high), (0.386, 0.413));
    assert_eq!(term(m, "waist_hip_ratio").neg_log2_p, None);
    let breathless = term(m, "breathless_level_ground");
    assert!(breathless.ci_includes_zero);
    assert_eq!(m.terms.iter().filter(|t| t.ci_includes_zero).count(), 1);
    assert_eq!(term(m, "ethnicity_black").field, "ethnicity");
}

#[test]
fn reference_subject_scores_baseline_risk() {
    let m = model();
    let b = m.score(&centered(m)).unwrap();
    assert!(b.linear_predictor.abs() < 1e-12, "{}", b.linear_predictor);
    assert!((b.total_risk - (1.0 - m.baseline_survival)).abs() < 1e-12);
    assert!(b.disclaimer.contains("Not a diagnosis"));
}

#[test]
fn breakdown_sums_and_hazard_ratios() {
    let m = model();
    let mut r = centered(m);
    r.age = 67;
    r.ethnicity = Ethnicity::Asian;
    r.currently_smoking = true;
    r.pack_years = 12.0;
    let a = m.score(&r).unwrap();
    let sum: f64 = a.contributions.iter().map(|c| c.contribution).sum();
    assert_eq!(sum, a.linear_predictor);
    assert!((a.total_risk - (1.0 - m.baseline_survival.powf(a.linear_predictor.exp()))).abs() < 1e-15);
    r.diabetes_mother = true;
    let b = m.score(&r).unwrap();
    assert!(((b.linear_predictor - a.linear_predictor).exp() - 0.489f64.exp()).abs() < 1e-12);
    assert_eq!(a, m.score(&{ r.diabetes_mother = false; r.clone() }).unwrap(), "pure function");
}

#[test]
fn whatif_deltas() {
    let m = model();
    let mut base = centered(m);
    base.alcohol_monthly_plus = true;
    let empty = m.whatif(&base, &ProfileInput::default(), false).unwrap();
    assert_eq!(empty.delta, 0.0);
    assert_eq!(empty.before, empty.after);

    let w = m.whatif(&base, &ProfileInput { alcohol_monthly_plus: Some(false), ..Default::default() }, false).unwrap();
    assert!((w.after.linear_predictor - w.before.linear_predictor - 0.375).abs() < 1e-12);
    assert_eq!(w.delta, w.after.total_risk - w.before.total_risk);
    assert!(w.delta > 0.0);

    let bmi = ProfileInput { bmi: Some(base.bmi - term(m, "bmi").scale), ..Default::default() };
    let w = m.whatif(&base, &bmi, false).unwrap();
    assert!((w.after.linear_predictor - w.before.linear_predictor + 0.399).abs() < 1e-12);
}

#[test]
fn non_modifiable_changes_need_override() {
    let m = model();
    let base = centered(m);
    let older = ProfileInput { age: Some(base.age + 5), ..Default::default() };
    assert!(matches!(m.whatif(&base, &older, false), Err(Error::NotModifiable(f)) if f == "age"));
    assert!(m.whatif(&base, &older, true).unwrap().delta > 0.0);
    let same_age = ProfileInput { age: Some(base.age), ..Default::default() };
    assert_eq!(m.whatif(&base, &same_age, false).unwrap().delta, 0.0);
    let health = ProfileInput { good_health: Some(true), ..Default::default() };
    assert!(m.whatif(&base, &health, false).is_err());
    let relaxed = model().clone().with_modifiable(&["good_health"]).unwrap();
    assert!(relaxed.whatif(&base, &health, false).unwrap().delta < 0.0);
    assert!(model().clone().with_modifiable(&["shoe_size"]).is_err());
}

#[test]
fn missing_fields_are_listed() {
    let p: ProfileInput = serde_json::from_str(r#"{"age": 50, "bmi": 27.5, "ethnicity": "asian"}"#).unwrap();
    match model().score_profile(&p) {
        Err(Error::MissingFields(f)) => {
            assert_eq!(f.len(), 15);
            assert!(f.contains(&"waist_hip_ratio".to_string()) && !f.contains(&"age".to_string()));
        }
        other => panic!("{other:?}"),
    }
    assert!(serde_json::from_str::<ProfileInput>(r#"{"age": 50, "height": 2}"#).is_err());
    let full = ProfileInput::from(&centered(model()));
    assert_eq!(full.to_record().unwrap(), centered(model()));
    let bad = ProfileInput { bmi: Some(-1.0), ..full };
    assert!(matches!(model().score_profile(&bad), Err(Error::OutOfRange { .. })));
}

#[test]
fn calibration_fixed_point_and_bounds() {
    let lps = [-1.0, -0.2, 0.0, 0.4, 1.3, 2.0];
    let s0 = calibrate_baseline(&lps, 0.05).unwrap();
    let mean = lps.iter().map(|lp| 1.0 - s0.powf(f64::exp(*lp))).sum::<f64>() / 6.0;
    assert!((mean - 0.05).abs() < 1e-12);
    assert_eq!(calibrate_baseline(&lps, 0.05).unwrap(), s0);
    assert!(matches!(calibrate_baseline(&lps, 0.0), Err(Error::CalibrationBracket(_))));
    assert!(calibrate_baseline(&lps, 1.0).is_err());
    assert!(calibrate_baseline(&[], 0.1).is_err());

    let m = model();
    assert!((m.calibration.achieved_mean_risk - TARGET_MEAN_RISK).abs() < 1e-10);
    let fresh = sample_features(&GeneratorConfig { n: 20_000, seed: 77, ..paper_preset() }).unwrap();
    assert!((mean_risk(m, &fresh) - TARGET_MEAN_RISK).abs() < 0.003);
}

#[test]
fn artifact_round_trip_and_validation() {
    let m = model();
    let json = m.to_json().unwrap();
    assert_eq!(&PublishedModel::from_json(&json).unwrap(), m);
    assert!(PublishedModel::from_json(&json.replace("\"baseline_survival\"", "\"extra\": 1, \"baseline_survival\"")).is_err());
    let mut bad = m.clone();
    bad.baseline_survival = 1.0;
    assert!(PublishedModel::from_json(&bad.to_json().unwrap()).is_err());
    let mut bad = m.clone();
    bad.terms.swap(0, 1);
    assert!(PublishedModel::from_json(&bad.to_json().unwrap()).is_err());
    let mut bad = m.clone();
    bad.terms[3].modifiable = true;
    assert!(PublishedModel::from_json(&bad.to_json().unwrap()).is_err());
}

fn record_strategy() -> impl Strategy<Value = SubjectRecord> {
    (
        (18u32..90, 0.6f64..1.2, 16.0f64..50.0, 0u8..3, 0.0f64..60.0),
        prop::collection::vec(any::<bool>(), 14),
    )
        .prop_map(|((age, whr, bmi, eth, py), f)| SubjectRecord {
            age,
            waist_hip_ratio: whr,
            bmi,
            ethnicity: [Ethnicity::Reference, Ethnicity::Asian, Ethnicity::Black][eth as usize],
            degree: f[0],
            cvd_diagnosis: f[1],
            cholesterol_meds: f[2],
            other_meds: f[3],
            stomach_pain: f[4],
            daytime_dozing: f[5],
            breathless_level_ground: f[6],
            diabetes_father: f[7],
            diabetes_mother: f[8],
            diabetes_siblings: f[9],
            alcohol_monthly_plus: f[10],
            currently_smoking: f[11],
            previous_smoker: None,
            pack_years: py,
            good_health: f[12] && f[13],
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ranking_follows_linear_predictor(a in record_strategy(), b in record_strategy()) {
        let m = model();
        let (x, y) = (m.score(&a).unwrap(), m.score(&b).unwrap());
        prop_assert!(x.total_risk > 0.0 && x.total_risk < 1.0);
        if x.linear_predictor < y.linear_predictor {
            prop_assert!(x.total_risk <= y.total_risk);
        }
        let sum: f64 = x.contributions.iter().map(|c| c.contribution).sum();
        prop_assert!((sum - x.linear_predictor).abs() < 1e-12);
    }
}

