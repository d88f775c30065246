//! RMSProp and Adam parameter updates with lazily allocated accumulators.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::layer::Layer;
use super::network::{Gradients, Network};

pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
const RMSPROP_DECAY: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    RmsProp,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::Adam => "adam",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::invalid_argument(format!(
                "unknown optimizer {other:?} (expected rmsprop or adam)"
            ))),
        }
    }
}

/// Per-layer accumulator state, shaped exactly like the layer parameters.
#[derive(Debug, Clone)]
enum Slot {
    RmsProp {
        acc_w: Matrix,
        acc_b: Vec<f64>,
    },
    Adam {
        m_w: Matrix,
        v_w: Matrix,
        m_b: Vec<f64>,
        v_b: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    slots: Vec<Option<Slot>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Optimizer {
            kind,
            learning_rate,
            step: 0,
            slots: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update in place. Accumulators are created on first use
    /// and must keep matching the network afterwards.
    pub fn apply(&mut self, network: &mut Network, grads: &Gradients) -> Result<()> {
        let depth = network.layers().len();
        if grads.layers.len() != depth {
            return Err(Error::invalid_argument(
                "gradient list does not match network depth",
            ));
        }
        if self.slots.is_empty() {
            self.slots = vec![None; depth];
        } else if self.slots.len() != depth {
            return Err(Error::invalid_argument(
                "optimizer state was built for a different network",
            ));
        }
        self.step += 1;
        for (i, layer) in network.layers_mut().iter_mut().enumerate() {
            let Layer::Dense(dense) = layer else { continue };
            let Some(g) = &grads.layers[i] else {
                return Err(Error::invalid_argument(format!(
                    "missing gradient for dense layer {i}"
                )));
            };
            if g.dw.rows() != dense.weights.rows()
                || g.dw.cols() != dense.weights.cols()
                || g.db.len() != dense.bias.len()
            {
                return Err(Error::invalid_argument(format!(
                    "gradient shape mismatch at layer {i}"
                )));
            }
            let kind = self.kind;
            let slot = self.slots[i].get_or_insert_with(|| match kind {
                OptimizerKind::RmsProp => Slot::RmsProp {
                    acc_w: Matrix::zeros(g.dw.rows(), g.dw.cols()),
                    acc_b: vec![0.0; g.db.len()],
                },
                OptimizerKind::Adam => Slot::Adam {
                    m_w: Matrix::zeros(g.dw.rows(), g.dw.cols()),
                    v_w: Matrix::zeros(g.dw.rows(), g.dw.cols()),
                    m_b: vec![0.0; g.db.len()],
                    v_b: vec![0.0; g.db.len()],
                },
            });
            match slot {
                Slot::RmsProp { acc_w, acc_b } => {
                    rmsprop(
                        dense.weights.data_mut(),
                        acc_w.data_mut(),
                        g.dw.data(),
                        self.learning_rate,
                    );
                    rmsprop(&mut dense.bias, acc_b, &g.db, self.learning_rate);
                }
                Slot::Adam { m_w, v_w, m_b, v_b } => {
                    adam(
                        dense.weights.data_mut(),
                        m_w.data_mut(),
                        v_w.data_mut(),
                        g.dw.data(),
                        self.learning_rate,
                        self.step,
                    );
                    adam(
                        &mut dense.bias,
                        m_b,
                        v_b,
                        &g.db,
                        self.learning_rate,
                        self.step,
                    );
                }
            }
        }
        Ok(())
    }
}

/// acc ← 0.9·acc + 0.1·g², then p ← p − lr·g/√(acc+ε).
fn rmsprop(params: &mut [f64], acc: &mut [f64], grad: &[f64], lr: f64) {
    for ((p, a), &g) in params.iter_mut().zip(acc).zip(grad) {
        *a = RMSPROP_DECAY * *a + (1.0 - RMSPROP_DECAY) * g * g;
        *p -= lr * g / (*a + EPSILON).sqrt();
    }
}

/// Standard bias-corrected Adam with β₁=0.9, β₂=0.999.
fn adam(params: &mut [f64], m: &mut [f64], v: &mut [f64], grad: &[f64], lr: f64, step: u64) {
    let c1 = 1.0 - ADAM_BETA1.powi(step as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(step as i32);
    for (((p, m), v), &g) in params.iter_mut().zip(m).zip(v).zip(grad) {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
    }
}
