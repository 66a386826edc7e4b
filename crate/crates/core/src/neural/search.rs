//! Random hyperparameter search with a line-delimited trial ledger.

use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::Activation;
use super::train::{train, NetConfig, OptimizerKind};
use crate::cohort::EncodedCohort;
use crate::error::{Error, Result};
use crate::eval::concordance_index;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub activations: Vec<Activation>,
    pub topologies: Vec<Vec<usize>>,
    /// Uniform `[low, high]`.
    pub dropout: (f64, f64),
    pub weight_decay: (f64, f64),
    pub batch_norm: Vec<bool>,
    pub optimizers: Vec<OptimizerKind>,
    pub momentum: (f64, f64),
    /// Log-uniform `[low, high]`.
    pub learning_rate: (f64, f64),
    pub batch_size: usize,
    pub epochs: usize,
}

impl SearchSpace {
    /// The published search space. Dropout's upper end is capped just below
    /// 1 where it is inclusive.
    pub fn published() -> Self {
        SearchSpace {
            activations: vec![Activation::LeakyRelu, Activation::Relu, Activation::Selu],
            topologies: vec![
                vec![8],
                vec![32],
                vec![256],
                vec![32, 32],
                vec![64, 64],
                vec![128, 128],
                vec![64, 16],
                vec![256, 32],
                vec![32, 32, 32],
                vec![64, 64, 64],
            ],
            dropout: (0.0, 0.9),
            weight_decay: (0.0, 20.0),
            batch_norm: vec![true, false],
            optimizers: vec![OptimizerKind::SgdMomentum, OptimizerKind::Adam],
            momentum: (0.0, 1.0),
            learning_rate: (1e-5, 1.0),
            batch_size: NetConfig::default().batch_size,
            epochs: NetConfig::default().epochs,
        }
    }

    fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a <= b && a.is_finite() && b.is_finite();
        if self.activations.is_empty() || self.topologies.is_empty() || self.batch_norm.is_empty() || self.optimizers.is_empty() {
            return Err(Error::InvalidConfig("every categorical search dimension needs at least one value".into()));
        }
        if !ordered(self.dropout) || !ordered(self.weight_decay) || !ordered(self.momentum) || !ordered(self.learning_rate) {
            return Err(Error::InvalidConfig("search ranges must be finite with low <= high".into()));
        }
        if self.learning_rate.0 <= 0.0 {
            return Err(Error::InvalidConfig("log-uniform learning rate needs a positive lower bound".into()));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng, seed: u64) -> NetConfig {
        let uniform = |rng: &mut ChaCha8Rng, (a, b): (f64, f64)| if a == b { a } else { rng.random_range(a..=b) };
        let activation = *self.activations.choose(rng).expect("validated");
        let hidden = self.topologies.choose(rng).expect("validated").clone();
        let dropout = uniform(rng, self.dropout).min(0.99);
        let weight_decay = uniform(rng, self.weight_decay);
        let batch_norm = *self.batch_norm.choose(rng).expect("validated");
        let optimizer = *self.optimizers.choose(rng).expect("validated");
        let momentum = uniform(rng, self.momentum);
        let (lo, hi) = self.learning_rate;
        let learning_rate = uniform(rng, (lo.ln(), hi.ln())).exp();
        NetConfig {
            hidden,
            activation,
            dropout,
            weight_decay,
            batch_norm,
            optimizer,
            momentum: if optimizer == OptimizerKind::Adam { 0.0 } else { momentum },
            learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: NetConfig,
    /// `None` when training failed; see `error`.
    pub validation_c_index: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: NetConfig,
    pub best_c_index: f64,
    pub trials: Vec<TrialRecord>,
}

impl SearchOutcome {
    pub fn write_ledger<W: Write>(&self, w: &mut W) -> Result<()> {
        for t in &self.trials {
            serde_json::to_writer(&mut *w, t)?;
            w.write_all(b"\n").map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(())
    }
}

/// Random search: `trials` configurations sampled from `space`, each trained
/// on `train_set` and scored by c-index on `validation`. Trials run in
/// parallel; trial `k` samples from RNG stream `k` and trains with seed
/// `seed + k`, so the outcome is independent of scheduling.
pub fn hyperparameter_search(
    train_set: &EncodedCohort,
    validation: &EncodedCohort,
    space: &SearchSpace,
    trials: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if trials < 1 {
        return Err(Error::InvalidArgument("hyperparameter search needs at least one trial".into()));
    }
    space.validate()?;
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let config = space.sample(&mut rng, seed.wrapping_add(k as u64));
            let scored = train(train_set, &config).and_then(|t| {
                let eta = t.net.forward(validation.matrix.view())?;
                concordance_index(&validation.times, &validation.events, eta.as_slice().expect("contiguous"))
            });
            match scored {
                Ok(c) => TrialRecord { trial: k, config, validation_c_index: Some(c), error: None },
                Err(e) => TrialRecord { trial: k, config, validation_c_index: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let best = records
        .iter()
        .filter_map(|r| r.validation_c_index.map(|c| (c, r)))
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.trial.cmp(&a.1.trial)))
        .ok_or_else(|| Error::InvalidArgument("every search trial failed".into()))?;
    Ok(SearchOutcome { best: best.1.config.clone(), best_c_index: best.0, trials: records })
}
