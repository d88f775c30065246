//! The layer stack: forward passes in train/test mode, backpropagation of
//! the batch-mean BCE loss, and the gradient container optimizers consume.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

use super::layer::{Activation, Layer};
use super::loss::bce_grad;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let net = Network { layers };
        net.validate()?;
        Ok(net)
    }

    /// Consecutive dense layers must chain fan_out → fan_in; dropout layers
    /// are dimension-preserving and impose nothing.
    fn validate(&self) -> Result<()> {
        let mut carried: Option<usize> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            if let Layer::Dense(d) = layer {
                if let Some(dim) = carried {
                    if d.fan_in() != dim {
                        return Err(Error::invalid_state(format!(
                            "layer {i} has fan-in {} but the previous layer produces {dim}",
                            d.fan_in()
                        )));
                    }
                }
                carried = Some(d.fan_out());
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    /// (fan_in, fan_out) of each dense layer, in order.
    pub fn geometry(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .filter_map(|l| l.as_dense().map(|d| (d.fan_in(), d.fan_out())))
            .collect()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers
            .iter()
            .find_map(|l| l.as_dense().map(|d| d.fan_in()))
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers
            .iter()
            .rev()
            .find_map(|l| l.as_dense().map(|d| d.fan_out()))
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if let Some(dim) = self.input_dim() {
            if batch.cols() != dim {
                return Err(Error::invalid_argument(format!(
                    "batch has {} columns but the network expects {dim}",
                    batch.cols()
                )));
            }
        }
        Ok(())
    }

    /// Test-mode forward pass: dropout layers are exactly the identity.
    pub fn infer(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            if let Layer::Dense(d) = layer {
                x = d.forward(&x);
            }
        }
        Ok(x)
    }

    /// Forward pass in the chosen mode. Train mode draws fresh dropout masks
    /// from `rng`; the returned cache records everything `backward` needs.
    pub fn forward(&self, batch: &Matrix, mode: Mode, rng: &mut Rng) -> Result<ForwardCache> {
        self.check_batch(batch)?;
        let mut outputs: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        let mut masks: Vec<Option<Matrix>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let x = if i == 0 { batch } else { &outputs[i - 1] };
            match layer {
                Layer::Dense(d) => {
                    outputs.push(d.forward(x));
                    masks.push(None);
                }
                Layer::Dropout(d) => match mode {
                    Mode::Test => {
                        outputs.push(x.clone());
                        masks.push(None);
                    }
                    Mode::Train => {
                        let mask = d.sample_mask(x.rows(), x.cols(), rng);
                        let mut dropped = x.clone();
                        for (v, &m) in dropped.data_mut().iter_mut().zip(mask.data()) {
                            *v *= m;
                        }
                        outputs.push(dropped);
                        masks.push(Some(mask));
                    }
                },
            }
        }
        Ok(ForwardCache {
            batch: batch.clone(),
            outputs,
            masks,
        })
    }

    /// Backpropagates the batch-mean BCE loss of the cached forward pass
    /// against `target`. Gradient slots align with the layer list; dropout
    /// layers hold `None`.
    pub fn backward(&self, cache: &ForwardCache, target: &Matrix) -> Result<Gradients> {
        if cache.outputs.len() != self.layers.len() {
            return Err(Error::invalid_argument(
                "forward cache does not match network depth",
            ));
        }
        let mut grad = bce_grad(cache.output(), target)?;
        let mut layers: Vec<Option<LayerGrad>> = vec![None; self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            match &self.layers[i] {
                Layer::Dense(d) => {
                    let out = &cache.outputs[i];
                    let dz = match d.activation {
                        // dσ/dz = σ(1−σ)
                        Activation::Sigmoid => {
                            let mut dz = grad.clone();
                            for (g, &o) in dz.data_mut().iter_mut().zip(out.data()) {
                                *g *= o * (1.0 - o);
                            }
                            dz
                        }
                        // Full softmax Jacobian: dz_j = p_j (g_j − Σ_i g_i p_i)
                        Activation::Softmax => {
                            let mut dz = grad.clone();
                            for r in 0..dz.rows() {
                                let p = out.row(r);
                                let g = dz.row_mut(r);
                                let dot: f64 = g.iter().zip(p).map(|(&gi, &pi)| gi * pi).sum();
                                for (gj, &pj) in g.iter_mut().zip(p) {
                                    *gj = pj * (*gj - dot);
                                }
                            }
                            dz
                        }
                    };
                    let dw = dz.matmul_tn(cache.input(i));
                    let db = dz.column_sums();
                    if i > 0 {
                        grad = dz.matmul_nn(&d.weights);
                    }
                    layers[i] = Some(LayerGrad { dw, db });
                }
                Layer::Dropout(_) => {
                    if let Some(mask) = &cache.masks[i] {
                        for (g, &m) in grad.data_mut().iter_mut().zip(mask.data()) {
                            *g *= m;
                        }
                    }
                }
            }
        }
        Ok(Gradients { layers })
    }
}

/// Activations recorded by a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: Matrix,
    /// Post-activation (dense) or post-mask (dropout) output of each layer.
    outputs: Vec<Matrix>,
    /// Inverted-dropout scale masks; `None` for dense layers and test mode.
    masks: Vec<Option<Matrix>>,
}

impl ForwardCache {
    fn input(&self, i: usize) -> &Matrix {
        if i == 0 {
            &self.batch
        } else {
            &self.outputs[i - 1]
        }
    }

    /// The network output for the cached batch.
    pub fn output(&self) -> &Matrix {
        self.outputs.last().unwrap_or(&self.batch)
    }
}

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub dw: Matrix,
    pub db: Vec<f64>,
}

/// One slot per network layer, `None` where the layer has no parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Option<LayerGrad>>,
}
