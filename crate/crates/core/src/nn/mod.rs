//! Dense feed-forward networks trained with mini-batch backpropagation:
//! sigmoid/softmax layers, inverted dropout, BCE loss, RMSProp and Adam.

pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod network;
pub mod optimizer;
pub mod train;

pub use layer::{glorot_init, sigmoid, Activation, DenseLayer, DropoutLayer, Layer};
pub use loss::{bce_grad, bce_loss, BCE_CLIP};
pub use network::{ForwardCache, Gradients, LayerGrad, Mode, Network};
pub use optimizer::{Optimizer, OptimizerKind, DEFAULT_LEARNING_RATE};
pub use train::{train_epochs, TrainConfig};
