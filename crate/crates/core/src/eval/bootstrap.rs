//! Percentile bootstrap over row resamples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

pub const DEFAULT_ROUNDS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub low: f64,
    pub high: f64,
    pub rounds: usize,
    /// Resamples on which the metric failed and were redrawn.
    pub failures: usize,
}

/// 2.5 / 97.5 percentile interval of `metric` over `rounds` resamples of
/// `0..n` drawn with replacement.
///
/// Replicate `r` draws from its own ChaCha8 stream `r` under `seed`, so the
/// result does not depend on thread scheduling. A failing resample is
/// redrawn from the same stream; more failures than successes is an error.
pub fn bootstrap_ci<F>(n: usize, rounds: usize, seed: u64, metric: F) -> Result<BootstrapInterval>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if rounds < 2 {
        return Err(Error::InvalidArgument(format!("bootstrap needs at least 2 rounds, got {rounds}")));
    }
    if n == 0 {
        return Err(Error::EmptyCohort);
    }
    let replicates: Vec<(Option<f64>, usize)> = (0..rounds)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut rows = vec![0usize; n];
            let mut failed = 0;
            // Past `rounds` failures on a single replicate the error is certain.
            while failed <= rounds {
                for slot in rows.iter_mut() {
                    *slot = rng.random_range(0..n);
                }
                match metric(&rows) {
                    Ok(v) if v.is_finite() => return (Some(v), failed),
                    _ => failed += 1,
                }
            }
            (None, failed)
        })
        .collect();

    let failures: usize = replicates.iter().map(|r| r.1).sum();
    let mut values: Vec<f64> = replicates.iter().filter_map(|r| r.0).collect();
    let attempts = values.len() + failures;
    if values.len() < rounds || 2 * failures > attempts {
        return Err(Error::BootstrapFailures { failures, attempts });
    }
    values.sort_by(f64::total_cmp);
    Ok(BootstrapInterval {
        low: quantile_sorted(&values, 0.025),
        high: quantile_sorted(&values, 0.975),
        rounds,
        failures,
    })
}
