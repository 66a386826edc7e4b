//! Negative log partial likelihood with Breslow ties.
//!
//! Risk-set sums are accumulated in one sweep over time-descending tie groups:
//! every subject with time >= t has been added by the time the events at `t`
//! are scored. Linear predictors are shifted by their maximum before
//! exponentiation; the shift cancels in every ratio.

use ndarray::{Array2, ArrayView2};

use crate::cohort::EncodedCohort;
use crate::error::{Error, Result};

/// Subjects grouped by tied time, in decreasing time order.
#[derive(Debug, Clone)]
pub struct RiskSetIndex {
    order: Vec<usize>,
    /// `[start, end)` ranges into `order`, one per distinct time.
    groups: Vec<(usize, usize)>,
}

impl RiskSetIndex {
    pub fn new(times: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[b].total_cmp(&times[a]).then(a.cmp(&b)));
        let mut groups = Vec::new();
        let mut start = 0;
        for k in 1..=order.len() {
            if k == order.len() || times[order[k]] != times[order[start]] {
                groups.push((start, k));
                start = k;
            }
        }
        RiskSetIndex { order, groups }
    }

    /// Tie groups in decreasing time order, as slices of row indices.
    pub fn groups_desc(&self) -> impl DoubleEndedIterator<Item = &[usize]> + '_ {
        self.groups.iter().map(move |&(s, e)| &self.order[s..e])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Derivatives {
    None,
    Gradient,
    Hessian,
}

#[derive(Debug, Clone)]
pub struct LikelihoodEval {
    pub value: f64,
    /// Empty unless requested.
    pub gradient: Vec<f64>,
    /// `p x p`; empty (0 x 0) unless requested.
    pub hessian: Array2<f64>,
}

/// Reusable evaluator over a fixed design and outcome.
pub struct PartialLikelihood<'a> {
    x: ArrayView2<'a, f64>,
    events: &'a [bool],
    index: RiskSetIndex,
}

impl<'a> PartialLikelihood<'a> {
    pub fn new(x: ArrayView2<'a, f64>, times: &'a [f64], events: &'a [bool]) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::EmptyCohort);
        }
        if times.len() != x.nrows() || events.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: times.len().min(events.len()),
            });
        }
        if !events.iter().any(|e| *e) {
            return Err(Error::NoEvents);
        }
        Ok(PartialLikelihood {
            x,
            events,
            index: RiskSetIndex::new(times),
        })
    }

    pub fn for_cohort(cohort: &'a EncodedCohort) -> Result<Self> {
        Self::new(cohort.matrix.view(), &cohort.times, &cohort.events)
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: beta.len(),
            });
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Overflow("coefficients"));
        }
        let eta: Vec<f64> = self
            .x
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect();
        if eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::Overflow("linear predictor"));
        }
        Ok(eta)
    }

    pub fn evaluate(&self, beta: &[f64], want: Derivatives) -> Result<LikelihoodEval> {
        let eta = self.linear_predictor(beta)?;
        let p = self.p();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let need_grad = want >= Derivatives::Gradient;
        let need_hess = want >= Derivatives::Hessian;

        let mut s0 = 0.0;
        let mut s1 = vec![0.0; if need_grad { p } else { 0 }];
        let mut s2 = Array2::<f64>::zeros(if need_hess { (p, p) } else { (0, 0) });
        let mut value = 0.0;
        let mut grad = vec![0.0; s1.len()];
        let mut hess = s2.clone();
        let mut event_x = vec![0.0; s1.len()];

        for group in self.index.groups_desc() {
            let mut d = 0usize;
            let mut event_eta = 0.0;
            event_x.iter_mut().for_each(|v| *v = 0.0);
            for &i in group {
                let w = (eta[i] - shift).exp();
                s0 += w;
                let row = self.x.row(i);
                if need_grad {
                    for (s, x) in s1.iter_mut().zip(row.iter()) {
                        *s += w * x;
                    }
                }
                if need_hess {
                    for a in 0..p {
                        let wa = w * row[a];
                        for b in a..p {
                            s2[[a, b]] += wa * row[b];
                        }
                    }
                }
                if self.events[i] {
                    d += 1;
                    event_eta += eta[i];
                    if need_grad {
                        for (e, x) in event_x.iter_mut().zip(row.iter()) {
                            *e += x;
                        }
                    }
                }
            }
            if d == 0 {
                continue;
            }
            let df = d as f64;
            value += df * (s0.ln() + shift) - event_eta;
            if need_grad {
                for a in 0..p {
                    grad[a] += df * s1[a] / s0 - event_x[a];
                }
            }
            if need_hess {
                for a in 0..p {
                    let ma = s1[a] / s0;
                    for b in a..p {
                        hess[[a, b]] += df * (s2[[a, b]] / s0 - ma * s1[b] / s0);
                    }
                }
            }
        }
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Overflow("partial likelihood"));
        }
        for a in 0..hess.nrows() {
            for b in 0..a {
                hess[[a, b]] = hess[[b, a]];
            }
        }
        Ok(LikelihoodEval {
            value,
            gradient: grad,
            hessian: hess,
        })
    }
}

/// Value, gradient and Hessian of the negative log partial likelihood at `beta`.
pub fn neg_log_partial_likelihood(beta: &[f64], cohort: &EncodedCohort) -> Result<LikelihoodEval> {
    PartialLikelihood::for_cohort(cohort)?.evaluate(beta, Derivatives::Hessian)
}

/// Loss and its gradient with respect to the linear predictors themselves.
///
/// `d loss / d eta_j = w_j * sum_{event groups k with t_k <= t_j} d_k / S0_k - event_j`.
pub fn loss_and_grad_eta(eta: &[f64], times: &[f64], events: &[bool]) -> Result<(f64, Vec<f64>)> {
    let index = RiskSetIndex::new(times);
    loss_and_grad_eta_indexed(eta, events, &index)
}

pub fn loss_and_grad_eta_indexed(eta: &[f64], events: &[bool], index: &RiskSetIndex) -> Result<(f64, Vec<f64>)> {
    if !events.iter().any(|e| *e) {
        return Err(Error::NoEvents);
    }
    if eta.iter().any(|e| !e.is_finite()) {
        return Err(Error::Overflow("linear predictor"));
    }
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();
    // descending sweep: risk-set sums and per-group d / S0
    let mut s0 = 0.0;
    let mut value = 0.0;
    let mut ratio = Vec::with_capacity(index.groups.len());
    for group in index.groups_desc() {
        let mut d = 0usize;
        for &i in group {
            s0 += w[i];
            if events[i] {
                d += 1;
                value -= eta[i];
            }
        }
        if d > 0 {
            value += d as f64 * (s0.ln() + shift);
        }
        ratio.push(d as f64 / s0);
    }
    // ascending sweep: cumulative sum of d / S0 over earlier-or-equal event times
    let mut grad = vec![0.0; eta.len()];
    let mut cum = 0.0;
    for (group, r) in index.groups_desc().rev().zip(ratio.iter().rev()) {
        cum += r;
        for &i in group {
            grad[i] = w[i] * cum - if events[i] { 1.0 } else { 0.0 };
        }
    }
    if !value.is_finite() {
        return Err(Error::Overflow("partial likelihood"));
    }
    Ok((value, grad))
}

#[cfg(test)]
pub(crate) mod oracle {
    /// Direct O(n^2) summation: for each event, log of the sum over everyone
    /// still at risk, minus the event's own linear predictor.
    pub fn naive_value(x: &[Vec<f64>], times: &[f64], events: &[bool], beta: &[f64]) -> f64 {
        let eta: Vec<f64> = x
            .iter()
            .map(|r| r.iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect();
        let mut total = 0.0;
        for i in 0..times.len() {
            if !events[i] {
                continue;
            }
            let mut s = 0.0;
            for j in 0..times.len() {
                if times[j] >= times[i] {
                    s += eta[j].exp();
                }
            }
            total += s.ln() - eta[i];
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn cohort(x: Vec<Vec<f64>>, times: Vec<f64>, events: Vec<bool>) -> EncodedCohort {
        let p = x.first().map_or(0, |r| r.len());
        let n = x.len();
        let flat = x.into_iter().flatten().collect();
        let m = Array2::from_shape_vec((n, p), flat).unwrap();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        EncodedCohort::new(names, m, times, events).unwrap()
    }

    #[test]
    fn three_events_at_zero_beta_is_log_six() {
        for p in [0usize, 1, 3] {
            let c = cohort(vec![vec![0.3; p], vec![-1.0; p], vec![2.0; p]], vec![1.0, 2.0, 3.0], vec![true; 3]);
            let v = neg_log_partial_likelihood(&vec![0.0; p], &c).unwrap().value;
            assert!((v - 6f64.ln()).abs() < 1e-15, "p={p}: {v}");
        }
    }

    #[test]
    fn single_event_subject_is_zero() {
        let c = cohort(vec![vec![1.5]], vec![2.0], vec![true]);
        assert_eq!(neg_log_partial_likelihood(&[0.0], &c).unwrap().value, 0.0);
    }

    #[test]
    fn six_subject_mixed_censoring_against_oracle() {
        let x = vec![vec![0.5], vec![-1.2], vec![1.0], vec![0.0], vec![2.2], vec![-0.3]];
        let times = vec![1.0, 2.0, 2.0, 3.5, 4.0, 5.0];
        let events = vec![true, false, true, true, false, true];
        let want = oracle::naive_value(&x, &times, &events, &[0.5]);
        let c = cohort(x, times, events);
        let got = neg_log_partial_likelihood(&[0.5], &c).unwrap().value;
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn no_events_is_an_error() {
        let c = cohort(vec![vec![1.0], vec![2.0]], vec![1.0, 2.0], vec![false, false]);
        assert!(matches!(neg_log_partial_likelihood(&[0.0], &c), Err(Error::NoEvents)));
    }

    #[test]
    fn eta_gradient_agrees_with_beta_gradient() {
        // with x = identity columns, d/d beta_j == d/d eta_j
        let n = 7;
        let x: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let times = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0];
        let events = vec![true, true, false, true, true, false, true];
        let beta: Vec<f64> = (0..n).map(|i| 0.1 * i as f64 - 0.3).collect();
        let c = cohort(x, times.clone(), events.clone());
        let full = neg_log_partial_likelihood(&beta, &c).unwrap();
        let (v, g) = loss_and_grad_eta(&beta, &times, &events).unwrap();
        assert!((v - full.value).abs() < 1e-12);
        for (a, b) in g.iter().zip(&full.gradient) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_spread_in_predictors_is_reported() {
        let c = cohort(vec![vec![1.0], vec![-1.0], vec![0.0]], vec![1.0, 2.0, 3.0], vec![true, true, true]);
        assert!(matches!(
            neg_log_partial_likelihood(&[1e300], &c),
            Err(Error::Overflow(_))
        ));
    }
}
