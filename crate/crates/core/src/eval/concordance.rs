//! Harrell's concordance index.
//!
//! A pair `(i, j)` is comparable when `i` has an event and either
//! `t_i < t_j`, or `t_i == t_j` with `j` censored. It is concordant when the
//! earlier failure has the higher score; tied scores count one half.

use crate::error::{Error, Result};

/// Integer pair counts behind a c-index value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub concordant: u64,
    pub tied_score: u64,
    pub comparable: u64,
}

impl PairCounts {
    pub fn value(&self) -> Result<f64> {
        if self.comparable == 0 {
            return Err(Error::NoComparablePairs);
        }
        Ok((self.concordant as f64 + 0.5 * self.tied_score as f64) / self.comparable as f64)
    }
}

fn check_inputs(times: &[f64], events: &[bool], scores: &[f64]) -> Result<()> {
    if times.len() != events.len() || times.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: if times.len() != events.len() { events.len() } else { scores.len() },
        });
    }
    if times.iter().chain(scores).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("times and scores must be finite".into()));
    }
    Ok(())
}

struct Fenwick(Vec<u64>);

impl Fenwick {
    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks strictly below `i`.
    fn below(&self, mut i: usize) -> u64 {
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i &= i - 1;
        }
        s
    }
}

/// Pair counts in `O(n log n)`.
pub fn concordance_counts(times: &[f64], events: &[bool], scores: &[f64]) -> Result<PairCounts> {
    check_inputs(times, events, scores)?;
    let n = times.len();
    let mut sorted_scores = scores.to_vec();
    sorted_scores.sort_by(f64::total_cmp);
    sorted_scores.dedup();
    let rank = |s: f64| sorted_scores.partition_point(|v| *v < s);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    // Tree holds every subject strictly later than the current time plus the
    // censored subjects at the current time.
    let mut tree = Fenwick(vec![0; sorted_scores.len() + 1]);
    let mut inserted = 0u64;
    let mut counts = PairCounts::default();
    let mut start = 0;
    while start < n {
        let t = times[order[start]];
        let end = start + order[start..].iter().take_while(|&&i| times[i] == t).count();
        let group = &order[start..end];
        for &i in group.iter().filter(|&&i| !events[i]) {
            tree.add(rank(scores[i]));
            inserted += 1;
        }
        for &i in group.iter().filter(|&&i| events[i]) {
            let r = rank(scores[i]);
            let below = tree.below(r);
            let at_or_below = tree.below(r + 1);
            counts.concordant += below;
            counts.tied_score += at_or_below - below;
            counts.comparable += inserted;
        }
        for &i in group.iter().filter(|&&i| events[i]) {
            tree.add(rank(scores[i]));
            inserted += 1;
        }
        start = end;
    }
    Ok(counts)
}

pub fn concordance_index(times: &[f64], events: &[bool], scores: &[f64]) -> Result<f64> {
    concordance_counts(times, events, scores)?.value()
}
