//! Minibatch training on the in-batch partial likelihood.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{Activation, Gradients, NeuralCoxNet};
use crate::cohort::EncodedCohort;
use crate::cox::likelihood::loss_and_grad_eta;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub dropout: f64,
    pub weight_decay: f64,
    pub batch_norm: bool,
    pub optimizer: OptimizerKind,
    /// Ignored by Adam.
    pub momentum: f64,
    pub learning_rate: f64,
    /// Batches of at least the cohort size train on the exact full likelihood.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for NetConfig {
    /// The tuned optimum for the 19-term model. Batch size and epoch count
    /// were not published and are local choices.
    fn default() -> Self {
        NetConfig {
            hidden: vec![64, 64, 64],
            activation: Activation::Selu,
            dropout: 0.04809,
            weight_decay: 0.00101,
            batch_norm: true,
            optimizer: OptimizerKind::Adam,
            momentum: 0.0,
            learning_rate: 0.00169,
            batch_size: 1024,
            epochs: 50,
            seed: 0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.hidden.contains(&0) {
            return bad("hidden widths must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be finite and non-negative, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be non-negative, got {}", self.weight_decay));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1], got {}", self.momentum));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's trained batches.
    pub loss: f64,
    pub batches: usize,
    pub skipped_batches: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedNet {
    pub net: NeuralCoxNet,
    pub trace: Vec<EpochRecord>,
    pub skipped_batches: usize,
}

enum Optimizer {
    Sgd { momentum: f64, velocity: Vec<Vec<f64>> },
    Adam { m: Vec<Vec<f64>>, v: Vec<Vec<f64>>, step: i32 },
}

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    fn new(cfg: &NetConfig, shapes: &[usize]) -> Self {
        let zeros = || shapes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        match cfg.optimizer {
            OptimizerKind::SgdMomentum => Optimizer::Sgd { momentum: cfg.momentum, velocity: zeros() },
            OptimizerKind::Adam => Optimizer::Adam { m: zeros(), v: zeros(), step: 0 },
        }
    }

    fn step(&mut self, params: Vec<&mut [f64]>, grads: &Gradients, lr: f64) {
        match self {
            Optimizer::Sgd { momentum, velocity } => {
                for ((p, g), vel) in params.into_iter().zip(&grads.0).zip(velocity) {
                    for k in 0..p.len() {
                        vel[k] = *momentum * vel[k] + g[k];
                        p[k] -= lr * vel[k];
                    }
                }
            }
            Optimizer::Adam { m, v, step } => {
                *step += 1;
                let c1 = 1.0 - ADAM_B1.powi(*step);
                let c2 = 1.0 - ADAM_B2.powi(*step);
                for (((p, g), m), v) in params.into_iter().zip(&grads.0).zip(m).zip(v) {
                    for k in 0..p.len() {
                        m[k] = ADAM_B1 * m[k] + (1.0 - ADAM_B1) * g[k];
                        v[k] = ADAM_B2 * v[k] + (1.0 - ADAM_B2) * g[k] * g[k];
                        p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Batch loss: partial likelihood per event plus `wd / 2 * ||W||^2`.
/// Returns the loss and gradients, or `None` when the batch has no events.
pub fn batch_loss_and_gradients(
    net: &mut NeuralCoxNet,
    x: ndarray::ArrayView2<f64>,
    times: &[f64],
    events: &[bool],
    weight_decay: f64,
    rng: &mut ChaCha8Rng,
    update_running: bool,
) -> Result<Option<(f64, Gradients)>> {
    let d = events.iter().filter(|e| **e).count();
    if d == 0 {
        return Ok(None);
    }
    let (nlpl, mut grads) = net.train_step(x, rng, update_running, |eta| {
        let (v, g) = loss_and_grad_eta(eta.as_slice().expect("contiguous"), times, events)?;
        Ok((v / d as f64, g.into_iter().map(|gi| gi / d as f64).collect()))
    })?;
    let mut loss = nlpl;
    if weight_decay > 0.0 {
        loss += 0.5 * weight_decay * net.weight_norm_sq();
        let mask = net.decay_mask();
        for ((g, p), decay) in grads.0.iter_mut().zip(net.parameters_mut()).zip(mask) {
            if decay {
                for (gk, pk) in g.iter_mut().zip(p.iter()) {
                    *gk += weight_decay * pk;
                }
            }
        }
    }
    Ok(Some((loss, grads)))
}

/// Trains a network on a standardized cohort. Deterministic given the seed.
pub fn train(cohort: &EncodedCohort, cfg: &NetConfig) -> Result<TrainedNet> {
    cfg.validate()?;
    let n = cohort.n();
    if n == 0 {
        return Err(Error::EmptyCohort);
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(2);

    let mut net = NeuralCoxNet::new(cohort.p(), &cfg.hidden, cfg.activation, cfg.batch_norm, cfg.dropout, &mut init_rng)?;
    let shapes: Vec<usize> = net.parameters_mut().iter().map(|p| p.len()).collect();
    let mut opt = Optimizer::new(cfg, &shapes);
    let full_batch = cfg.batch_size >= n;
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut skipped_total = 0;

    for epoch in 0..cfg.epochs {
        if !full_batch {
            order.shuffle(&mut shuffle_rng);
        }
        let (mut sum, mut trained, mut skipped) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let times: Vec<f64> = chunk.iter().map(|&i| cohort.times[i]).collect();
            let events: Vec<bool> = chunk.iter().map(|&i| cohort.events[i]).collect();
            let x: Array2<f64> = if full_batch { cohort.matrix.clone() } else { cohort.matrix.select(ndarray::Axis(0), chunk) };
            match batch_loss_and_gradients(&mut net, x.view(), &times, &events, cfg.weight_decay, &mut dropout_rng, true)? {
                None => skipped += 1,
                Some((loss, grads)) => {
                    if !loss.is_finite() {
                        return Err(Error::Overflow("training loss"));
                    }
                    sum += loss;
                    trained += 1;
                    opt.step(net.parameters_mut(), &grads, cfg.learning_rate);
                }
            }
        }
        skipped_total += skipped;
        if trained == 0 {
            return Err(Error::NoTrainableBatches);
        }
        trace.push(EpochRecord { epoch, loss: sum / trained as f64, batches: trained, skipped_batches: skipped });
    }

    let outputs = net.forward(cohort.matrix.view())?;
    net.offset = outputs.mean().unwrap_or(0.0);
    Ok(TrainedNet { net, trace, skipped_batches: skipped_total })
}
