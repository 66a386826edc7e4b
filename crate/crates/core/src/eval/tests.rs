use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::*;
use crate::error::Error;

/// Exhaustive pair enumeration.
fn oracle_counts(t: &[f64], e: &[bool], s: &[f64]) -> PairCounts {
    let mut c = PairCounts::default();
    for i in 0..t.len() {
        if !e[i] {
            continue;
        }
        for j in 0..t.len() {
            if i == j {
                continue;
            }
            if t[i] < t[j] || (t[i] == t[j] && !e[j]) {
                c.comparable += 1;
                if s[i] > s[j] {
                    c.concordant += 1;
                } else if s[i] == s[j] {
                    c.tied_score += 1;
                }
            }
        }
    }
    c
}

#[test]
fn perfect_ordering_and_all_ties() {
    let t = [1.0, 2.0, 3.0, 4.0, 5.0];
    let e = [true; 5];
    assert_eq!(concordance_index(&t, &e, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap(), 1.0);
    assert_eq!(concordance_index(&t, &e, &[0.3; 5]).unwrap(), 0.5);
}

#[test]
fn eight_subjects_match_enumeration() {
    let t = [2.0, 3.5, 3.5, 1.0, 6.0, 4.0, 3.5, 7.5];
    let e = [true, true, false, true, false, true, true, false];
    let s = [0.8, 0.2, 0.5, 1.4, -0.3, 0.2, 0.9, 0.0];
    let fast = concordance_counts(&t, &e, &s).unwrap();
    assert_eq!(fast, oracle_counts(&t, &e, &s));
    assert_eq!(fast.value().unwrap(), oracle_counts(&t, &e, &s).value().unwrap());
}

#[test]
fn no_comparable_pairs_is_an_error() {
    assert!(matches!(concordance_index(&[1.0, 2.0], &[false, false], &[0.0, 1.0]), Err(Error::NoComparablePairs)));
    assert!(matches!(concordance_index(&[1.0, 1.0], &[true, true], &[0.0, 1.0]), Err(Error::NoComparablePairs)));
    assert!(concordance_index(&[1.0], &[true, false], &[0.0]).is_err());
    assert!(concordance_index(&[1.0, 2.0], &[true, false], &[f64::NAN, 0.0]).is_err());
}

fn tied_dataset() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<f64>)> {
    (1usize..=300).prop_flat_map(|n| {
        (
            prop::collection::vec(1u8..40, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(0u8..25, n).prop_map(|v| v.into_iter().map(|k| f64::from(k) * 0.1 - 1.0).collect()),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn fast_counts_equal_enumeration((t, e, s) in tied_dataset()) {
        prop_assert_eq!(concordance_counts(&t, &e, &s).unwrap(), oracle_counts(&t, &e, &s));
    }

    #[test]
    fn invariant_under_increasing_transforms((t, e, s) in tied_dataset()) {
        let a = concordance_index(&t, &e, &s);
        let b = concordance_index(&t, &e, &s.iter().map(|v| (3.0 * v).exp() - 7.0).collect::<Vec<_>>());
        let c = concordance_index(&t, &e, &s.iter().map(|v| v * v * v).collect::<Vec<_>>());
        if let Ok(a) = a {
            prop_assert_eq!(a, b.unwrap());
            prop_assert_eq!(a, c.unwrap());
        }
    }

    #[test]
    fn reversed_scores_complement(n in 2usize..200, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let e: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        if let Ok(a) = concordance_counts(&t, &e, &s) {
            if a.comparable > 0 {
                let b = concordance_counts(&t, &e, &neg).unwrap();
                prop_assert_eq!(a.concordant + b.concordant, a.comparable);
                let sum = a.value().unwrap() + b.value().unwrap();
                prop_assert!((sum - 1.0).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn bootstrap_constant_metric() {
    let ci = bootstrap_ci(20, DEFAULT_ROUNDS, 7, |_| Ok(0.42)).unwrap();
    assert_eq!((ci.low, ci.high), (0.42, 0.42));
    assert_eq!(ci.rounds, 50);
    assert!(bootstrap_ci(20, 1, 7, |_| Ok(0.0)).is_err());
}

#[test]
fn bootstrap_is_deterministic_and_redraws_failures() {
    let metric = |rows: &[usize]| {
        if rows[0] % 4 == 0 {
            Err(Error::NoComparablePairs)
        } else {
            Ok(rows.iter().sum::<usize>() as f64 / rows.len() as f64)
        }
    };
    let a = bootstrap_ci(40, 30, 11, metric).unwrap();
    let b = bootstrap_ci(40, 30, 11, metric).unwrap();
    assert_eq!(a, b);
    assert!(a.failures > 0 && a.low < a.high);
    let c = bootstrap_ci(40, 30, 12, metric).unwrap();
    assert_ne!(a, c);
    assert!(matches!(
        bootstrap_ci(40, 10, 1, |_| Err(Error::NoComparablePairs)),
        Err(Error::BootstrapFailures { .. })
    ));
    // failing on three quarters of draws exceeds the 50% budget
    let mostly = |rows: &[usize]| if rows[0] % 4 != 0 { Err(Error::NoComparablePairs) } else { Ok(1.0) };
    assert!(bootstrap_ci(40, 40, 3, mostly).is_err());
}

fn exponential_cohort(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(1.0).unwrap();
    let mut t = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.sample(StandardNormal);
        let ti = exp.sample(&mut rng) / (0.05 * (0.8 * xi).exp());
        let ci = 2.0 + 18.0 * rng.random::<f64>();
        x.push(xi);
        t.push(ti.min(ci));
        e.push(ti <= ci);
    }
    (t, e, x)
}

#[test]
fn bootstrap_interval_covers_point_estimate() {
    let mut hits = 0;
    for rerun in 0..50u64 {
        let (t, e, x) = exponential_cohort(10_000, 1000 + rerun);
        let point = concordance_index(&t, &e, &x).unwrap();
        let ci = bootstrap_ci(t.len(), DEFAULT_ROUNDS, rerun, |rows| {
            let tt: Vec<f64> = rows.iter().map(|&i| t[i]).collect();
            let ee: Vec<bool> = rows.iter().map(|&i| e[i]).collect();
            let xx: Vec<f64> = rows.iter().map(|&i| x[i]).collect();
            concordance_index(&tt, &ee, &xx)
        })
        .unwrap();
        hits += usize::from(ci.low <= point && point <= ci.high);
    }
    assert!(hits >= 45, "{hits}/50");
}

#[test]
fn kaplan_meier_without_censoring_is_empirical() {
    let t = [0.5, 1.0, 1.0, 2.0, 3.0, 4.0, 4.0, 6.0];
    let km = KaplanMeier::fit(&t, &[true; 8]).unwrap();
    assert!((1.0 - km.survival_at(3.5).unwrap() - 5.0 / 8.0).abs() < 1e-15);
    assert_eq!(km.survival_at(0.4).unwrap(), 1.0);
    assert!(km.survival_at(6.5).is_err());
}

#[test]
fn kaplan_meier_hand_computed() {
    // at risk 5, 1 death; 3 at risk after a censoring at 2, 1 death
    let km = KaplanMeier::fit(&[1.0, 2.0, 3.0, 4.0, 5.0], &[true, false, true, false, false]).unwrap();
    assert!((km.survival_at(3.0).unwrap() - 0.8 * (2.0 / 3.0)).abs() < 1e-15);
}

fn loo_oracle(t: &[f64], e: &[bool], h: f64) -> Vec<f64> {
    let km = |t: &[f64], e: &[bool]| -> f64 {
        let mut s = 1.0;
        let mut times: Vec<f64> = t.iter().zip(e).filter(|(ti, ei)| **ei && **ti <= h).map(|(ti, _)| *ti).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        for u in times {
            let r = t.iter().filter(|v| **v >= u).count() as f64;
            let d = t.iter().zip(e).filter(|(v, ev)| **v == u && **ev).count() as f64;
            s *= 1.0 - d / r;
        }
        1.0 - s
    };
    let n = t.len() as f64;
    let full = km(t, e);
    (0..t.len())
        .map(|i| {
            let tt: Vec<f64> = t.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
            let ee: Vec<bool> = e.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
            n * full - (n - 1.0) * km(&tt, &ee)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pseudo_observations_match_recomputation(
        t in prop::collection::vec(1u8..15, 2..60),
        e in prop::collection::vec(any::<bool>(), 60),
        h in 1u8..15,
    ) {
        let t: Vec<f64> = t.into_iter().map(f64::from).collect();
        let e = &e[..t.len()];
        let h = f64::from(h).min(t.iter().cloned().fold(0.0, f64::max));
        let fast = pseudo_observations(&t, e, h).unwrap();
        let slow = loo_oracle(&t, e, h);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
        }
    }
}

#[test]
fn pseudo_observations_without_censoring_are_indicators() {
    let t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let p = pseudo_observations(&t, &[true; 6], 3.5).unwrap();
    for (v, want) in p.iter().zip([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]) {
        assert!((v - want).abs() < 1e-12);
    }
}

// Reference values from statsmodels 0.14 lowess(frac=0.75, it=0).
const LX: [f64; 15] = [0.1, 0.4, 0.4, 0.9, 1.3, 1.7, 2.0, 2.2, 2.9, 3.1, 3.3, 3.8, 4.4, 4.5, 5.0];
const LY: [f64; 15] = [0.3, 0.1, 0.9, 0.7, 1.6, 1.2, 2.5, 1.9, 2.2, 3.4, 2.8, 3.1, 4.9, 3.6, 4.4];

#[test]
fn lowess_matches_reference_implementation() {
    let exact = [
        0.2322581977491686, 0.4980673506139944, 0.4980673506139944, 0.9415139336816626, 1.2934943384693318,
        1.6490755222517146, 1.9021500107762348, 2.07596168049343, 2.6489413319111192, 2.821719555215717,
        3.0086454282460457, 3.456091145984658, 3.988606456487503, 4.0787397168640895, 4.531705252901388,
    ];
    let coarse = [6, 9].map(|k| (k, [1.9052072171967438, 2.828793380078583][(k == 9) as usize]));
    let got = lowess_with_delta(&LX, &LY, 0.75, 0.0).unwrap();
    for (a, b) in got.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    let got = lowess_with_delta(&LX, &LY, 0.75, 0.5).unwrap();
    for (k, v) in got.iter().enumerate() {
        let want = coarse.iter().find(|c| c.0 == k).map_or(exact[k], |c| c.1);
        assert!((v - want).abs() < 1e-12, "{k}: {v} vs {want}");
    }
}

#[test]
fn lowess_reproduces_lines_and_constants() {
    let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin() * 5.0).collect();
    let line: Vec<f64> = x.iter().map(|v| 0.3 - 1.7 * v).collect();
    for (f, y) in lowess(&x, &line, 0.75).unwrap().iter().zip(&line) {
        assert!((f - y).abs() < 1e-10);
    }
    let flat = lowess(&[2.0; 9], &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0], 0.75).unwrap();
    assert!(flat.iter().all(|v| (v - 5.0 / 9.0).abs() < 1e-15));
}

#[test]
fn calibration_trivial_cases() {
    let t = [11.0, 12.0, 10.5, 13.0];
    let c = calibration(&[0.0; 4], &t, &[false; 4], 10.0).unwrap();
    assert_eq!(c.ici, 0.0);
    assert_eq!(c.mean_observed, 0.0);

    // constant prediction, 3 of 8 events before the horizon, no censoring before it
    let t = [1.0, 2.0, 4.0, 11.0, 12.0, 12.5, 13.0, 14.0];
    let e = [true, true, true, false, true, false, false, false];
    let c = calibration(&[0.1; 8], &t, &e, 10.0).unwrap();
    assert!((c.mean_observed - 0.375).abs() < 1e-15);
    assert!((c.ici - 0.275).abs() < 1e-12, "{}", c.ici);

    assert!(calibration(&[0.1; 8], &t, &e, 20.0).is_err());
    assert!(calibration(&[0.1; 8], &t, &e, 0.0).is_err());
    assert!(calibration(&[1.1; 8], &t, &e, 5.0).is_err());
}

#[test]
fn well_specified_predictions_calibrate() {
    let (t, e, x) = exponential_cohort(40_000, 99);
    let h = 10.0;
    let risk: Vec<f64> = x.iter().map(|v| 1.0 - (-0.05 * (0.8 * v).exp() * h).exp()).collect();
    let c = calibration(&risk, &t, &e, h).unwrap();
    assert!(c.ici < 0.005, "ici {}", c.ici);
    assert!((c.mean_predicted - c.mean_observed).abs() < 0.01);
    assert!(c.curve.len() <= CURVE_POINTS && c.curve.windows(2).all(|w| w[0].predicted < w[1].predicted));
    // badly scaled predictions are flagged
    let off: Vec<f64> = risk.iter().map(|r| (1.6 * r).min(1.0)).collect();
    assert!(calibration(&off, &t, &e, h).unwrap().ici > 0.05);
}

#[test]
fn report_renders() {
    let (t, e, x) = exponential_cohort(2_000, 5);
    let risk: Vec<f64> = x.iter().map(|v| 1.0 - (-0.5 * (0.8 * v).exp()).exp()).collect();
    let r = evaluate(&t, &e, &x, &risk, 10.0, DEFAULT_ROUNDS, 1).unwrap();
    assert_eq!(r, evaluate(&t, &e, &x, &risk, 10.0, DEFAULT_ROUNDS, 1).unwrap());
    assert!(r.c_index_ci.0 < r.c_index && r.c_index < r.c_index_ci.1);
    assert!(r.render_text().contains("c-index"));
    assert!(r.calibration_csv().starts_with("predicted,observed\n"));
    let f = forest_plot_csv(&["a".into()], &[0.0], &[-1.0], &[1.0]);
    assert_eq!(f.lines().nth(1).unwrap(), format!("a,0,-1,1,1,{},{}", (-1f64).exp(), 1f64.exp()));
}
