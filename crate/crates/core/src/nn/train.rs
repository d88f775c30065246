//! Deterministic mini-batch training.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

use super::loss::bce_loss;
use super::network::{Mode, Network};
use super::optimizer::{Optimizer, OptimizerKind, DEFAULT_LEARNING_RATE};

/// Training hyperparameters. Defaults: 100 epochs, mini-batches of 16,
/// RMSProp at learning rate 0.001.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            optimizer: OptimizerKind::RmsProp,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }
}

impl TrainConfig {
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_optimizer(mut self, optimizer: OptimizerKind) -> Self {
        self.optimizer = optimizer;
        self
    }
}

/// Runs shuffled mini-batch backpropagation of `network` on (data, target)
/// row pairs and returns the per-epoch mean per-sample loss. The final
/// partial batch is trained, not dropped. Deterministic for a fixed seed.
pub fn train_epochs(
    network: &mut Network,
    data: &Matrix,
    target: &Matrix,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if data.rows() == 0 {
        return Err(Error::invalid_argument("training data is empty"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid_argument("batch size must be at least 1"));
    }
    if target.rows() != data.rows() {
        return Err(Error::invalid_argument(format!(
            "{} data rows but {} target rows",
            data.rows(),
            target.rows()
        )));
    }
    let n = data.rows();
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = Matrix::gather_rows(data, chunk);
            let want = Matrix::gather_rows(target, chunk);
            let cache = network.forward(&batch, Mode::Train, rng)?;
            epoch_loss += bce_loss(cache.output(), &want)? * chunk.len() as f64;
            let grads = network.backward(&cache, &want)?;
            optimizer.apply(network, &grads)?;
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(history)
}
