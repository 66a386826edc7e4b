use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::*;

fn cohort(n: usize, beta: &[f64], seed: u64) -> EncodedCohort {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = beta.len();
    let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
    let exp = Exp::new(1.0).unwrap();
    let (mut times, mut events) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let eta: f64 = (0..p).map(|j| x[[i, j]] * beta[j]).sum();
        let t = exp.sample(&mut rng) / (0.1 * eta.exp());
        let c = 10.0 * rng.random::<f64>();
        times.push(t.min(c).max(1e-6));
        events.push(t <= c);
    }
    EncodedCohort::new((0..p).map(|j| format!("x{j}")).collect(), x, times, events).unwrap()
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn noise_removed_signal_kept() {
    let c = cohort(20_000, &[0.0, 0.4], 1);
    let sel = backward_eliminate(&c, &SelectOptions { seed: 3, ..SelectOptions::default() }).unwrap();
    assert_eq!(sel.kept, names(&["x1"]));
    assert_eq!(sel.ledger.removed(), vec!["x0"]);
}

#[test]
fn single_strong_feature_is_kept() {
    let c = cohort(2_000, &[1.0], 2);
    let sel = backward_eliminate(&c, &SelectOptions::default()).unwrap();
    assert_eq!(sel.kept, names(&["x0"]));
    assert_eq!(sel.ledger.steps.len(), 1);
    assert_eq!(sel.ledger.steps[0].decision, Decision::Kept);
}

#[test]
fn indicator_groups_leave_together() {
    let c = cohort(6_000, &[0.6, 0.0, 0.0, -0.5], 3)
        .with_groups(names(&["a", "colour", "colour", "d"]))
        .unwrap();
    let sel = backward_eliminate(&c, &SelectOptions { folds: 3, ..SelectOptions::default() }).unwrap();
    assert_eq!(sel.kept, names(&["a", "d"]));
    let step = sel.ledger.steps.iter().find(|s| s.decision == Decision::Removed).unwrap();
    assert_eq!(step.candidate, "colour");
    assert_eq!(step.columns, names(&["x1", "x2"]));
}

#[test]
fn ledger_invariants_and_replay() {
    let beta = [0.5, 0.0, 0.3, 0.0, 0.0, 0.25];
    let c = cohort(8_000, &beta, 4);
    let opts = SelectOptions { seed: 9, ..SelectOptions::default() };
    let sel = backward_eliminate(&c, &opts).unwrap();
    assert_eq!(sel, backward_eliminate(&c, &opts).unwrap());

    for f in &c.feature_names {
        assert!(sel.ledger.steps.iter().any(|s| &s.candidate == f));
    }
    assert!(sel.kept.iter().all(|k| c.feature_names.contains(k)));
    let passes = sel.ledger.steps.iter().map(|s| s.pass).max().unwrap() + 1;
    assert!(passes <= beta.len());
    for s in sel.ledger.steps.iter().filter(|s| s.decision == Decision::Removed) {
        let without = s.cv_c_index_without.as_ref().unwrap();
        assert!(without.mean >= s.baseline_cv_c_index.mean - s.baseline_cv_c_index.sd);
        assert_eq!(s.baseline_cv_c_index.folds.len(), 2);
    }
    // at most one removal per pass
    for p in 0..passes {
        let removed = sel.ledger.steps.iter().filter(|s| s.pass == p && s.decision == Decision::Removed).count();
        assert!(removed <= 1);
    }

    let mut buf = Vec::new();
    sel.ledger.write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), sel.ledger.steps.len());
    let first: EliminationStep = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first, sel.ledger.steps[0]);
}

#[test]
fn candidate_rule_uses_candidate_spread() {
    let c = cohort(4_000, &[0.5, 0.0, 0.2], 5);
    let sel = backward_eliminate(&c, &SelectOptions { rule: SdRule::Candidate, ..SelectOptions::default() }).unwrap();
    for s in sel.ledger.steps.iter().filter(|s| s.threshold.is_some()) {
        assert_eq!(s.threshold.unwrap(), s.cv_c_index_without.as_ref().unwrap().sd);
    }
}

#[test]
fn bad_fold_counts_are_rejected() {
    let c = cohort(100, &[0.5], 6);
    assert!(backward_eliminate(&c, &SelectOptions { folds: 1, ..SelectOptions::default() }).is_err());
}

#[test]
fn review_filter() {
    let universe = names(&["age", "sex", "bmi", "smoking"]);
    let kept = names(&["age", "sex", "bmi"]);
    let (out, rec) = clinical_review_filter(&kept, &universe, &ReviewOverrides::default()).unwrap();
    assert_eq!(out, kept);
    assert!(rec.is_empty());

    let o = ReviewOverrides {
        allow: vec![Override { feature: "smoking".into(), reason: "established risk factor".into() }],
        block: vec![
            Override { feature: "sex".into(), reason: "no c-index loss when excluded".into() },
            Override { feature: "smoking2".into(), reason: "x".into() },
        ],
    };
    assert!(matches!(clinical_review_filter(&kept, &universe, &o), Err(Error::UnknownFeature(f)) if f == "smoking2"));

    let o = ReviewOverrides { block: o.block[..1].to_vec(), ..o };
    let (out, rec) = clinical_review_filter(&kept, &universe, &o).unwrap();
    assert_eq!(out, names(&["age", "bmi", "smoking"]));
    assert_eq!(rec.len(), 2);
    assert!(rec.iter().all(|r| r.changed && !r.reason.is_empty()));

    let clash = ReviewOverrides { allow: o.block.clone(), block: o.block.clone() };
    assert!(clinical_review_filter(&kept, &universe, &clash).is_err());
}
