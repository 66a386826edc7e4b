use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EncodedCohort;
use crate::error::{Error, Result};

fn strata(events: &[bool]) -> [(&'static str, Vec<usize>); 2] {
    let (ev, non): (Vec<usize>, Vec<usize>) = (0..events.len()).partition(|&i| events[i]);
    [("event", ev), ("non-event", non)]
}

/// Train/test partition stratified on the event indicator.
///
/// Each stratum contributes `round(test_fraction * stratum_size)` rows to the test
/// set. Both parts keep the input row order.
pub fn stratified_split(
    cohort: &EncodedCohort,
    test_fraction: f64,
    seed: u64,
) -> Result<(EncodedCohort, EncodedCohort)> {
    let (train, test) = stratified_split_indices(&cohort.events, test_fraction, seed)?;
    Ok((cohort.select_rows(&train), cohort.select_rows(&test)))
}

/// Index form of [`stratified_split`]; returns sorted `(train, test)` row indices.
pub fn stratified_split_indices(
    events: &[bool],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(events.len());
    let mut test = Vec::new();
    for (name, mut rows) in strata(events) {
        if rows.len() < 2 {
            return Err(Error::SmallStratum {
                stratum: name,
                count: rows.len(),
            });
        }
        rows.shuffle(&mut rng);
        let k = (test_fraction * rows.len() as f64).round() as usize;
        test.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Fold label in `0..folds` for every row, dealt round-robin within each outcome
/// stratum after a seeded shuffle so every fold receives events.
pub fn kfold_assignments(events: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![0; events.len()];
    for (name, mut rows) in strata(events) {
        if name == "event" && rows.len() < folds {
            return Err(Error::InvalidArgument(format!(
                "{} events cannot populate {folds} folds",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for (k, i) in rows.into_iter().enumerate() {
            labels[i] = k % folds;
        }
    }
    Ok(labels)
}
