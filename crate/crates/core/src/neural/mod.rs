//! Feedforward Cox network trained on the partial likelihood.

mod net;
mod search;
mod train;
mod weights;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

pub use net::{Activation, BatchNorm, Block, Gradients, NeuralCoxNet, BN_EPS, BN_MOMENTUM};
pub use search::{hyperparameter_search, SearchOutcome, SearchSpace, TrialRecord};
pub use train::{batch_loss_and_gradients, train, EpochRecord, NetConfig, OptimizerKind, TrainedNet};
pub use weights::{read_model, write_model, MAGIC, VERSION};

use crate::cohort::{EncodedCohort, Standardization};
use crate::error::{Error, Result};

/// A trained network together with the encoding it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralCoxModel {
    pub feature_names: Vec<String>,
    pub standardization: Standardization,
    pub net: NeuralCoxNet,
}

impl NeuralCoxModel {
    pub fn new(cohort: &EncodedCohort, net: NeuralCoxNet) -> Self {
        NeuralCoxModel {
            feature_names: cohort.feature_names.clone(),
            standardization: cohort.standardization.clone(),
            net,
        }
    }

    /// Log-risk for every row of an already encoded and standardized cohort.
    pub fn predict(&self, cohort: &EncodedCohort) -> Result<Vec<f64>> {
        if cohort.feature_names != self.feature_names {
            return Err(Error::InvalidArgument("cohort columns differ from the model's features".into()));
        }
        Ok(self.net.forward(cohort.matrix.view())?.to_vec())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_model(&mut buf, self)?;
        Ok(buf)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        read_model(&mut bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        write_model(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        read_model(&mut BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
    }
}
