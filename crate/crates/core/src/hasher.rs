//! Two-stage autoencoder hashing: greedy layer-wise de-noising
//! pretraining, end-to-end fine-tuning with a dropout layer ahead of the
//! coding layer, decoder removal, and threshold binarization.

use crate::code::BinaryCode;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{
    train_epochs, Activation, DenseLayer, Layer, Network, OptimizerKind, TrainConfig,
    DEFAULT_LEARNING_RATE,
};
use crate::rng::Rng;

/// Fraction of inputs zeroed by the de-noising / pre-coding dropout.
pub const DEFAULT_DROPOUT_P: f64 = 0.2;

/// Chained (fan_in, fan_out) pairs of the encoder half; the last fan_out is
/// the code length in bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderGeometry {
    pairs: Vec<(usize, usize)>,
}

impl EncoderGeometry {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid_argument("encoder geometry is empty"));
        }
        for (i, &(fan_in, fan_out)) in pairs.iter().enumerate() {
            if fan_in == 0 || fan_out == 0 {
                return Err(Error::invalid_argument(format!(
                    "geometry pair {i} has a zero dimension"
                )));
            }
            if i > 0 && pairs[i - 1].1 != fan_in {
                return Err(Error::invalid_argument(format!(
                    "geometry pair {i} expects fan-in {fan_in} but pair {} produces {}",
                    i - 1,
                    pairs[i - 1].1
                )));
            }
        }
        Ok(EncoderGeometry { pairs })
    }

    /// Parses "1024x768,768x512,512x16".
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for part in text.split(',') {
            let (a, b) = part
                .split_once('x')
                .ok_or_else(|| Error::parse(format!("geometry pair {part:?} is not AxB")))?;
            let fan_in = a
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(format!("bad fan-in in {part:?}")))?;
            let fan_out = b
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(format!("bad fan-out in {part:?}")))?;
            pairs.push((fan_in, fan_out));
        }
        EncoderGeometry::new(pairs)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn input_dim(&self) -> usize {
        self.pairs[0].0
    }

    /// Code length k in bits.
    pub fn code_bits(&self) -> usize {
        self.pairs[self.pairs.len() - 1].1
    }
}

impl std::fmt::Display for EncoderGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (fan_in, fan_out)) in self.pairs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{fan_in}x{fan_out}")?;
        }
        Ok(())
    }
}

/// Weights produced by layer-wise pretraining, indexed like the geometry:
/// `encoders[i]` maps pair i forward, `decoders[i]` reconstructs it.
#[derive(Debug, Clone)]
pub struct PretrainedStack {
    pub encoders: Vec<DenseLayer>,
    pub decoders: Vec<DenseLayer>,
    /// Per-layer loss histories from the individual autoencoder runs.
    pub histories: Vec<Vec<f64>>,
}

/// Hyperparameters for the pretraining stage. The per-layer autoencoders
/// always train with RMSProp.
#[derive(Debug, Clone, Copy)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_p: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 100,
            batch_size: 16,
            learning_rate: DEFAULT_LEARNING_RATE,
            dropout_p: DEFAULT_DROPOUT_P,
        }
    }
}

/// Trains each geometry pair as its own de-noising autoencoder
/// Dropout → Sigmoid(fan_in→fan_out) → Sigmoid(fan_out→fan_in), feeding
/// deeper pairs the clean test-mode encoding of the trained layers above.
pub fn layer_train(
    images: &Matrix,
    geometry: &EncoderGeometry,
    config: &PretrainConfig,
    rng: &mut Rng,
) -> Result<PretrainedStack> {
    if images.cols() != geometry.input_dim() {
        return Err(Error::invalid_argument(format!(
            "images have {} columns but the geometry expects {}",
            images.cols(),
            geometry.input_dim()
        )));
    }
    let train_config = TrainConfig {
        epochs: config.epochs,
        batch_size: config.batch_size,
        optimizer: OptimizerKind::RmsProp,
        learning_rate: config.learning_rate,
    };
    let mut current = images.clone();
    let mut stack = PretrainedStack {
        encoders: Vec::with_capacity(geometry.pairs.len()),
        decoders: Vec::with_capacity(geometry.pairs.len()),
        histories: Vec::with_capacity(geometry.pairs.len()),
    };
    for &(fan_in, fan_out) in geometry.pairs() {
        let mut dae = Network::new(vec![
            Layer::dropout(config.dropout_p)?,
            Layer::dense(fan_in, fan_out, Activation::Sigmoid, rng)?,
            Layer::dense(fan_out, fan_in, Activation::Sigmoid, rng)?,
        ])?;
        let history = train_epochs(&mut dae, &current, &current, &train_config, rng)?;
        let mut dense = dae.into_layers().into_iter().filter_map(|l| match l {
            Layer::Dense(d) => Some(d),
            Layer::Dropout(_) => None,
        });
        let encoder = dense.next().expect("autoencoder has an encoder layer");
        let decoder = dense.next().expect("autoencoder has a decoder layer");
        // Clean (test-mode) encoding feeds the next layer's training.
        let encoder_net = Network::new(vec![Layer::Dense(encoder.clone())])?;
        current = encoder_net.infer(&current)?;
        stack.encoders.push(encoder);
        stack.decoders.push(decoder);
        stack.histories.push(history);
    }
    Ok(stack)
}

/// Hyperparameters for end-to-end fine-tuning.
#[derive(Debug, Clone, Copy)]
pub struct FineTuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub dropout_p: f64,
    /// Insert a dropout layer immediately before the coding layer.
    pub use_dropout: bool,
    /// Give the final reconstruction layer a softmax activation; disabling
    /// it keeps the whole decoder sigmoid (ablation).
    pub softmax_output: bool,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            epochs: 100,
            batch_size: 16,
            optimizer: OptimizerKind::RmsProp,
            learning_rate: DEFAULT_LEARNING_RATE,
            dropout_p: DEFAULT_DROPOUT_P,
            use_dropout: true,
            softmax_output: true,
        }
    }
}

/// Stacks pretrained weights into the full autoencoder — encoder sigmoid
/// layers with dropout before the coding layer, then the mirrored decoder
/// whose final layer is softmax — without training it.
pub fn assemble_stack(
    geometry: &EncoderGeometry,
    stack: &PretrainedStack,
    config: &FineTuneConfig,
) -> Result<Network> {
    let n = geometry.pairs().len();
    if stack.encoders.len() != n || stack.decoders.len() != n {
        return Err(Error::invalid_argument(format!(
            "pretrained stack has {} encoder / {} decoder layers for a {n}-pair geometry",
            stack.encoders.len(),
            stack.decoders.len()
        )));
    }
    for (i, &(fan_in, fan_out)) in geometry.pairs().iter().enumerate() {
        let enc = &stack.encoders[i];
        let dec = &stack.decoders[i];
        if (enc.fan_in(), enc.fan_out()) != (fan_in, fan_out) {
            return Err(Error::invalid_argument(format!(
                "encoder layer {i} is {}x{}, geometry expects {fan_out}x{fan_in}",
                enc.fan_out(),
                enc.fan_in()
            )));
        }
        if (dec.fan_in(), dec.fan_out()) != (fan_out, fan_in) {
            return Err(Error::invalid_argument(format!(
                "decoder layer {i} is {}x{}, geometry expects {fan_in}x{fan_out}",
                dec.fan_out(),
                dec.fan_in()
            )));
        }
    }
    let mut layers = Vec::with_capacity(2 * n + 1);
    for (i, enc) in stack.encoders.iter().enumerate() {
        if i == n - 1 && config.use_dropout {
            layers.push(Layer::dropout(config.dropout_p)?);
        }
        let mut enc = enc.clone();
        enc.activation = Activation::Sigmoid;
        layers.push(Layer::Dense(enc));
    }
    for (i, dec) in stack.decoders.iter().enumerate().rev() {
        let mut dec = dec.clone();
        dec.activation = if i == 0 && config.softmax_output {
            Activation::Softmax
        } else {
            Activation::Sigmoid
        };
        layers.push(Layer::Dense(dec));
    }
    Network::new(layers)
}

/// Fine-tunes the assembled stack end-to-end on its own inputs and returns
/// the trained network with its loss history.
pub fn fine_tune(
    images: &Matrix,
    geometry: &EncoderGeometry,
    stack: &PretrainedStack,
    config: &FineTuneConfig,
    rng: &mut Rng,
) -> Result<(Network, Vec<f64>)> {
    let mut network = assemble_stack(geometry, stack, config)?;
    let train_config = TrainConfig {
        epochs: config.epochs,
        batch_size: config.batch_size,
        optimizer: config.optimizer,
        learning_rate: config.learning_rate,
    };
    let history = train_epochs(&mut network, images, images, &train_config, rng)?;
    Ok((network, history))
}

/// Removes the decoder: keeps layers up to and including the coding layer
/// (the dense layer at the encoder/decoder boundary). The model must be a
/// symmetric autoencoder — 2n dense layers whose decoder half mirrors the
/// encoder half in shape.
pub fn build_encoder(model: &Network) -> Result<Network> {
    let dense_count = model
        .layers()
        .iter()
        .filter(|l| l.as_dense().is_some())
        .count();
    if dense_count == 0 || dense_count % 2 != 0 {
        return Err(Error::invalid_state(format!(
            "{dense_count} dense layers do not form an encoder/decoder pair"
        )));
    }
    let n = dense_count / 2;
    let dense: Vec<&DenseLayer> = model.layers().iter().filter_map(|l| l.as_dense()).collect();
    for i in 0..n {
        let enc = dense[i];
        let dec = dense[dense_count - 1 - i];
        if (enc.fan_in(), enc.fan_out()) != (dec.fan_out(), dec.fan_in()) {
            return Err(Error::invalid_state(format!(
                "decoder layer {} does not mirror encoder layer {i}",
                dense_count - 1 - i
            )));
        }
    }
    let mut layers = Vec::new();
    let mut seen = 0;
    for layer in model.layers() {
        let is_dense = layer.as_dense().is_some();
        layers.push(layer.clone());
        if is_dense {
            seen += 1;
            if seen == n {
                break;
            }
        }
    }
    Network::new(layers)
}

/// bit i = 1 iff activation i > 0.5 (strictly).
pub fn binarize(activations: &[f64]) -> BinaryCode {
    let bits: Vec<bool> = activations.iter().map(|&a| a > 0.5).collect();
    BinaryCode::from_bits(&bits)
}

/// Encodes every row of `images` through the encoder and binarizes the
/// coding-layer activations.
pub fn encode_batch(encoder: &Network, images: &Matrix) -> Result<Vec<BinaryCode>> {
    let activations = encoder.infer(images)?;
    Ok((0..activations.rows())
        .map(|r| binarize(activations.row(r)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::bce_loss;

    fn synthetic_images(n: usize, dim: usize, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        // Blocky patterns: a handful of prototypes plus pixel noise keeps
        // the task learnable at tiny scale.
        let prototypes: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..dim).map(|_| f64::from(rng.next_f64() < 0.5)).collect())
            .collect();
        Matrix::from_fn(n, dim, |r, c| {
            let base = prototypes[r % 8][c];
            (base * 0.9 + 0.05 + rng.uniform(-0.03, 0.03)).clamp(0.0, 1.0)
        })
    }

    fn quick_pretrain(epochs: usize) -> PretrainConfig {
        PretrainConfig {
            epochs,
            ..PretrainConfig::default()
        }
    }

    #[test]
    fn geometry_validates_chaining() {
        assert!(EncoderGeometry::new(vec![(64, 16)]).is_ok());
        assert!(EncoderGeometry::new(vec![(64, 32), (32, 8)]).is_ok());
        assert!(EncoderGeometry::new(vec![(64, 32), (16, 8)]).is_err());
        assert!(EncoderGeometry::new(vec![]).is_err());
        assert!(EncoderGeometry::new(vec![(0, 4)]).is_err());
    }

    #[test]
    fn geometry_parses_and_prints() {
        let g = EncoderGeometry::parse("1024x768,768x512,512x16").unwrap();
        assert_eq!(g.pairs(), &[(1024, 768), (768, 512), (512, 16)]);
        assert_eq!(g.input_dim(), 1024);
        assert_eq!(g.code_bits(), 16);
        assert_eq!(g.to_string(), "1024x768,768x512,512x16");
        assert!(EncoderGeometry::parse("64-16").is_err());
        assert!(EncoderGeometry::parse("ax16").is_err());
    }

    #[test]
    fn layer_train_returns_mirrored_shapes() {
        let images = synthetic_images(40, 64, 1);
        let geometry = EncoderGeometry::new(vec![(64, 16)]).unwrap();
        let stack = layer_train(&images, &geometry, &quick_pretrain(2), &mut Rng::new(2)).unwrap();
        assert_eq!(stack.encoders.len(), 1);
        assert_eq!(stack.decoders.len(), 1);
        assert_eq!(
            (stack.encoders[0].fan_in(), stack.encoders[0].fan_out()),
            (64, 16)
        );
        assert_eq!(
            (stack.decoders[0].fan_in(), stack.decoders[0].fan_out()),
            (16, 64)
        );
    }

    #[test]
    fn layer_train_stacks_two_pairs() {
        let images = synthetic_images(40, 32, 3);
        let geometry = EncoderGeometry::new(vec![(32, 16), (16, 8)]).unwrap();
        let stack = layer_train(&images, &geometry, &quick_pretrain(2), &mut Rng::new(4)).unwrap();
        assert_eq!(stack.encoders.len(), 2);
        assert_eq!(
            (stack.encoders[1].fan_in(), stack.encoders[1].fan_out()),
            (16, 8)
        );
        assert_eq!(
            (stack.decoders[1].fan_in(), stack.decoders[1].fan_out()),
            (8, 16)
        );
    }

    #[test]
    fn pretraining_reduces_reconstruction_loss() {
        let images = synthetic_images(80, 64, 5);
        let geometry = EncoderGeometry::new(vec![(64, 16)]).unwrap();
        let stack = layer_train(&images, &geometry, &quick_pretrain(40), &mut Rng::new(6)).unwrap();
        let history = &stack.histories[0];
        assert!(
            history[history.len() - 1] < history[0],
            "loss went {} -> {}",
            history[0],
            history[history.len() - 1]
        );
    }

    #[test]
    fn layer_train_rejects_wrong_width() {
        let images = synthetic_images(10, 32, 7);
        let geometry = EncoderGeometry::new(vec![(64, 16)]).unwrap();
        assert!(layer_train(&images, &geometry, &quick_pretrain(1), &mut Rng::new(0)).is_err());
    }

    /// The layer sequence the fine-tune stack must have for a two-pair
    /// geometry: Sig, Dropout, Sig (coding), Sig, Softmax.
    #[test]
    fn assembled_stack_has_the_documented_layout() {
        let images = synthetic_images(30, 32, 8);
        let geometry = EncoderGeometry::new(vec![(32, 16), (16, 8)]).unwrap();
        let stack = layer_train(&images, &geometry, &quick_pretrain(1), &mut Rng::new(9)).unwrap();
        let net = assemble_stack(&geometry, &stack, &FineTuneConfig::default()).unwrap();

        let kinds: Vec<String> = net
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => format!(
                    "{}({}->{})",
                    match d.activation {
                        Activation::Sigmoid => "sig",
                        Activation::Softmax => "softmax",
                    },
                    d.fan_in(),
                    d.fan_out()
                ),
                Layer::Dropout(d) => format!("dropout({})", d.p),
            })
            .collect();
        assert_eq!(
            kinds,
            vec![
                "sig(32->16)",
                "dropout(0.2)",
                "sig(16->8)",
                "sig(8->16)",
                "softmax(16->32)",
            ]
        );
    }

    #[test]
    fn dropout_ablation_only_removes_the_dropout_layer() {
        let images = synthetic_images(30, 32, 10);
        let geometry = EncoderGeometry::new(vec![(32, 16), (16, 8)]).unwrap();
        let stack = layer_train(&images, &geometry, &quick_pretrain(1), &mut Rng::new(11)).unwrap();
        let with = assemble_stack(&geometry, &stack, &FineTuneConfig::default()).unwrap();
        let without = assemble_stack(
            &geometry,
            &stack,
            &FineTuneConfig {
                use_dropout: false,
                ..FineTuneConfig::default()
            },
        )
        .unwrap();
        assert_eq!(with.layers().len(), without.layers().len() + 1);
        let with_dense: Vec<_> = with.layers().iter().filter_map(|l| l.as_dense()).collect();
        let without_dense: Vec<_> = without
            .layers()
            .iter()
            .filter_map(|l| l.as_dense())
            .collect();
        assert_eq!(with_dense, without_dense);
    }

    #[test]
    fn sigmoid_output_ablation_changes_only_the_last_activation() {
        let images = synthetic_images(30, 32, 12);
        let geometry = EncoderGeometry::new(vec![(32, 16)]).unwrap();
        let stack = layer_train(&images, &geometry, &quick_pretrain(1), &mut Rng::new(13)).unwrap();
        let net = assemble_stack(
            &geometry,
            &stack,
            &FineTuneConfig {
                softmax_output: false,
                ..FineTuneConfig::default()
            },
        )
        .unwrap();
        let last = net.layers().last().unwrap().as_dense().unwrap();
        assert_eq!(last.activation, Activation::Sigmoid);
    }

    #[test]
    fn fine_tune_does_not_hurt_reconstruction() {
        let images = synthetic_images(60, 32, 14);
        let geometry = EncoderGeometry::new(vec![(32, 8)]).unwrap();
        let stack =
            layer_train(&images, &geometry, &quick_pretrain(30), &mut Rng::new(15)).unwrap();

        // Reconstruction loss of the assembled (untrained) stack...
        let config = FineTuneConfig {
            epochs: 30,
            ..FineTuneConfig::default()
        };
        let before_net = assemble_stack(&geometry, &stack, &config).unwrap();
        let before = bce_loss(&before_net.infer(&images).unwrap(), &images).unwrap();

        // ...versus after fine-tuning the same stack.
        let (after_net, _) =
            fine_tune(&images, &geometry, &stack, &config, &mut Rng::new(16)).unwrap();
        let after = bce_loss(&after_net.infer(&images).unwrap(), &images).unwrap();
        assert!(after <= before, "fine-tune regressed: {before} -> {after}");
    }

    #[test]
    fn build_encoder_truncates_at_the_coding_layer() {
        let images = synthetic_images(30, 32, 17);
        let geometry = EncoderGeometry::new(vec![(32, 16), (16, 8)]).unwrap();
        let stack = layer_train(&images, &geometry, &quick_pretrain(1), &mut Rng::new(18)).unwrap();
        let (full, _) = fine_tune(
            &images,
            &geometry,
            &stack,
            &FineTuneConfig {
                epochs: 1,
                ..FineTuneConfig::default()
            },
            &mut Rng::new(19),
        )
        .unwrap();

        let encoder = build_encoder(&full).unwrap();
        // Sig(32->16), Dropout, Sig(16->8): three layers, 8-dim output.
        assert_eq!(encoder.layers().len(), 3);
        assert_eq!(encoder.output_dim(), Some(8));

        // Encoder forward equals the full model truncated at the coding
        // layer, and dropout is inert at test time.
        let probe = synthetic_images(5, 32, 20);
        let enc_out = encoder.infer(&probe).unwrap();
        assert_eq!(enc_out.cols(), 8);
        for &v in enc_out.data() {
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn build_encoder_rejects_asymmetric_models() {
        let mut rng = Rng::new(21);
        let odd = Network::new(vec![
            Layer::dense(8, 4, Activation::Sigmoid, &mut rng).unwrap(),
            Layer::dense(4, 2, Activation::Sigmoid, &mut rng).unwrap(),
            Layer::dense(2, 8, Activation::Sigmoid, &mut rng).unwrap(),
        ])
        .unwrap();
        assert!(build_encoder(&odd).is_err());

        let not_mirrored = Network::new(vec![
            Layer::dense(8, 4, Activation::Sigmoid, &mut rng).unwrap(),
            Layer::dense(4, 6, Activation::Sigmoid, &mut rng).unwrap(),
        ])
        .unwrap();
        assert!(build_encoder(&not_mirrored).is_err());
    }

    #[test]
    fn binarize_applies_a_strict_threshold() {
        let code = binarize(&[0.2, 0.7, 0.5]);
        assert_eq!(code.len(), 3);
        assert!(!code.bit(0));
        assert!(code.bit(1));
        assert!(!code.bit(2), "0.5 is not strictly greater than 0.5");

        let eps = binarize(&[0.5 + 1e-12; 4]);
        assert_eq!(eps.ones(), 4);

        // Idempotence: re-binarizing the 0/1 reals of a code is a no-op.
        let reals: Vec<f64> = (0..3).map(|i| f64::from(code.bit(i))).collect();
        assert_eq!(binarize(&reals), code);
    }

    #[test]
    fn encoding_is_deterministic() {
        let images = synthetic_images(30, 32, 22);
        let geometry = EncoderGeometry::new(vec![(32, 8)]).unwrap();
        let stack = layer_train(&images, &geometry, &quick_pretrain(2), &mut Rng::new(23)).unwrap();
        let (full, _) = fine_tune(
            &images,
            &geometry,
            &stack,
            &FineTuneConfig {
                epochs: 2,
                ..FineTuneConfig::default()
            },
            &mut Rng::new(24),
        )
        .unwrap();
        let encoder = build_encoder(&full).unwrap();
        let a = encode_batch(&encoder, &images).unwrap();
        let b = encode_batch(&encoder, &images).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|c| c.len() == 8));
    }

    #[test]
    fn pretraining_is_deterministic() {
        let images = synthetic_images(30, 32, 25);
        let geometry = EncoderGeometry::new(vec![(32, 8)]).unwrap();
        let a = layer_train(&images, &geometry, &quick_pretrain(3), &mut Rng::new(26)).unwrap();
        let b = layer_train(&images, &geometry, &quick_pretrain(3), &mut Rng::new(26)).unwrap();
        assert_eq!(a.encoders[0], b.encoders[0]);
        assert_eq!(a.decoders[0], b.decoders[0]);
        assert_eq!(a.histories, b.histories);
    }
}
