//! Feedforward log-risk network with hand-written backpropagation.
//!
//! Each hidden block is `Linear -> activation -> BatchNorm -> Dropout`; the
//! output layer is a bias-free linear map to one scalar, since a constant
//! offset is not identifiable under the partial likelihood.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;
const SELU_SCALE: f64 = 1.050_700_987_355_480_5;
const LEAKY_SLOPE: f64 = 0.01;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// No nonlinearity; reduces a one-layer net to the linear Cox model.
    Identity,
    Relu,
    LeakyRelu,
    Selu,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Selu => {
                if z > 0.0 {
                    SELU_SCALE * z
                } else {
                    SELU_SCALE * SELU_ALPHA * z.exp_m1()
                }
            }
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => f64::from(u8::from(z > 0.0)),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Selu => {
                if z > 0.0 {
                    SELU_SCALE
                } else {
                    SELU_SCALE * SELU_ALPHA * z.exp()
                }
            }
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::LeakyRelu => 2,
            Activation::Selu => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::LeakyRelu,
            3 => Activation::Selu,
            _ => return None,
        })
    }

    /// He scaling for rectifiers, LeCun otherwise.
    fn init_gain(self) -> f64 {
        match self {
            Activation::Relu | Activation::LeakyRelu => 2.0,
            Activation::Identity | Activation::Selu => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// `in x out`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub norm: Option<BatchNorm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralCoxNet {
    pub activation: Activation,
    pub dropout: f64,
    pub blocks: Vec<Block>,
    /// `last width` weights of the bias-free output layer.
    pub output: Array1<f64>,
    /// Subtracted from every evaluation-mode output; set at export so training
    /// outputs have mean zero.
    pub offset: f64,
}

/// Per-parameter gradients laid out like [`NeuralCoxNet::parameters_mut`].
#[derive(Debug, Clone)]
pub struct Gradients(pub Vec<Vec<f64>>);

/// Intermediate values of one training-mode pass.
struct BlockCache {
    input: Array2<f64>,
    pre: Array2<f64>,
    /// Normalized activations and inverse std, when batch norm is on.
    xhat: Option<(Array2<f64>, Array1<f64>)>,
    mask: Option<Array2<f64>>,
}

impl NeuralCoxNet {
    pub fn new(input_dim: usize, hidden: &[usize], activation: Activation, batch_norm: bool, dropout: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if input_dim == 0 || hidden.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidConfig(format!("dropout must be in [0, 1), got {dropout}")));
        }
        let mut blocks = Vec::with_capacity(hidden.len());
        let mut fan_in = input_dim;
        for &width in hidden {
            let sd = (activation.init_gain() / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, sd).expect("positive sd");
            blocks.push(Block {
                weight: Array2::from_shape_fn((fan_in, width), |_| normal.sample(rng)),
                bias: Array1::zeros(width),
                norm: batch_norm.then(|| BatchNorm {
                    gamma: Array1::ones(width),
                    beta: Array1::zeros(width),
                    running_mean: Array1::zeros(width),
                    running_var: Array1::ones(width),
                }),
            });
            fan_in = width;
        }
        let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("positive sd");
        Ok(NeuralCoxNet {
            activation,
            dropout,
            blocks,
            output: Array1::from_shape_fn(fan_in, |_| normal.sample(rng)),
            offset: 0.0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.blocks.first().map_or(self.output.len(), |b| b.weight.nrows())
    }

    pub fn widths(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.weight.ncols()).collect()
    }

    pub fn batch_norm(&self) -> bool {
        self.blocks.first().is_some_and(|b| b.norm.is_some())
    }

    /// Trainable tensors in a fixed order: per block weight, bias, then
    /// gamma and beta when normalized; finally the output weights.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(b.weight.as_slice_mut().expect("standard layout"));
            out.push(b.bias.as_slice_mut().expect("standard layout"));
            if let Some(n) = &mut b.norm {
                out.push(n.gamma.as_slice_mut().expect("standard layout"));
                out.push(n.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out.push(self.output.as_slice_mut().expect("standard layout"));
        out
    }

    /// Which entries of [`Self::parameters_mut`] are weight matrices subject
    /// to decay.
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend([true, false]);
            if b.norm.is_some() {
                out.extend([false, false]);
            }
        }
        out.push(true);
        out
    }

    /// Sum of squared weight-matrix entries.
    pub fn weight_norm_sq(&self) -> f64 {
        self.blocks.iter().map(|b| b.weight.iter().map(|w| w * w).sum::<f64>()).sum::<f64>()
            + self.output.iter().map(|w| w * w).sum::<f64>()
    }

    fn check_dim(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.ncols() });
        }
        Ok(())
    }

    /// Evaluation-mode log-risk: running normalization statistics, no dropout.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_dim(&x)?;
        let mut h = x.to_owned();
        for b in &self.blocks {
            let mut z = h.dot(&b.weight) + &b.bias;
            z.mapv_inplace(|v| self.activation.apply(v));
            if let Some(n) = &b.norm {
                let inv = n.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                z = (z - &n.running_mean) * &inv * &n.gamma + &n.beta;
            }
            h = z;
        }
        Ok(h.dot(&self.output) - self.offset)
    }

    pub fn forward_row(&self, x: &[f64]) -> Result<f64> {
        let v = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(self.forward(v)?[0])
    }

    /// Training-mode pass: batch statistics and dropout masks from `rng`.
    /// Updates running statistics when `update_running` is set.
    fn forward_train(&mut self, x: ArrayView2<f64>, rng: &mut ChaCha8Rng, update_running: bool) -> (Array1<f64>, Array2<f64>, Vec<BlockCache>) {
        let mut h = x.to_owned();
        let mut caches = Vec::with_capacity(self.blocks.len());
        let keep = 1.0 - self.dropout;
        let nrows = x.nrows() as f64;
        for b in &mut self.blocks {
            let pre = h.dot(&b.weight) + &b.bias;
            let act = pre.mapv(|v| self.activation.apply(v));
            let (mut out, xhat) = match &mut b.norm {
                Some(n) => {
                    let mean = act.mean_axis(Axis(0)).expect("nonempty batch");
                    let centered = &act - &mean;
                    let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("nonempty batch");
                    let inv = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                    let xhat = &centered * &inv;
                    if update_running {
                        let unbiased = if nrows > 1.0 { &var * (nrows / (nrows - 1.0)) } else { var.clone() };
                        n.running_mean = &n.running_mean * (1.0 - BN_MOMENTUM) + &mean * BN_MOMENTUM;
                        n.running_var = &n.running_var * (1.0 - BN_MOMENTUM) + &unbiased * BN_MOMENTUM;
                    }
                    (&xhat * &n.gamma + &n.beta, Some((xhat, inv)))
                }
                None => (act, None),
            };
            let mask = (self.dropout > 0.0).then(|| {
                Array2::from_shape_fn(out.raw_dim(), |_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            });
            if let Some(m) = &mask {
                out *= m;
            }
            caches.push(BlockCache { input: h, pre, xhat, mask });
            h = out;
        }
        (h.dot(&self.output), h, caches)
    }

    /// Training-mode outputs and the gradient of `sum_i g_i * eta_i` for a
    /// caller-supplied `g = d loss / d eta`.
    pub fn train_step(
        &mut self,
        x: ArrayView2<f64>,
        rng: &mut ChaCha8Rng,
        update_running: bool,
        loss_grad: impl FnOnce(&Array1<f64>) -> Result<(f64, Vec<f64>)>,
    ) -> Result<(f64, Gradients)> {
        self.check_dim(&x)?;
        let (eta, last, caches) = self.forward_train(x, rng, update_running);
        let (loss, g) = loss_grad(&eta)?;
        let g = Array1::from(g);
        let mut grads: Vec<Vec<f64>> = Vec::new();
        let d_output = last.t().dot(&g);
        let mut dh = g.insert_axis(Axis(1)).dot(&self.output.view().insert_axis(Axis(0)));
        for (b, c) in self.blocks.iter().zip(caches).rev() {
            if let Some(m) = &c.mask {
                dh *= m;
            }
            let mut block_grads = Vec::with_capacity(4);
            let dact = match (&b.norm, &c.xhat) {
                (Some(n), Some((xhat, inv))) => {
                    let dgamma = (&dh * xhat).sum_axis(Axis(0));
                    let dbeta = dh.sum_axis(Axis(0));
                    let dxhat = &dh * &n.gamma;
                    let m = dh.nrows() as f64;
                    let sum_dxhat = dxhat.sum_axis(Axis(0));
                    let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                    let dact = (&dxhat * m - &sum_dxhat - xhat * &sum_dxhat_xhat) * &(inv / m);
                    block_grads.push(dbeta.to_vec());
                    block_grads.push(dgamma.to_vec());
                    dact
                }
                _ => dh,
            };
            let dpre = &dact * &c.pre.mapv(|v| self.activation.derivative(v));
            let dw = c.input.t().dot(&dpre);
            let db = dpre.sum_axis(Axis(0));
            dh = dpre.dot(&b.weight.t());
            // collected back to front, reversed once at the end
            block_grads.push(db.to_vec());
            block_grads.push(dw.as_standard_layout().iter().copied().collect());
            grads.extend(block_grads);
        }
        grads.reverse();
        grads.push(d_output.to_vec());
        Ok((loss, Gradients(grads)))
    }

    /// Gradients of the loss w.r.t. a batch without touching running statistics.
    pub fn gradients(
        &self,
        x: ArrayView2<f64>,
        rng: &mut ChaCha8Rng,
        loss_grad: impl FnOnce(&Array1<f64>) -> Result<(f64, Vec<f64>)>,
    ) -> Result<(f64, Gradients)> {
        self.clone().train_step(x, rng, false, loss_grad)
    }
}
