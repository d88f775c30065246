//! Layer kinds: dense (sigmoid or softmax) and inverted dropout.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Softmax,
}

/// Uniform Glorot initialization: a fan_out × fan_in matrix drawn from
/// ±√(6/(fan_in+fan_out)). Biases are not part of the draw — layers start
/// them at zero.
pub fn glorot_init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid_argument(format!(
            "layer dimensions must be positive, got {fan_in}x{fan_out}"
        )));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Ok(Matrix::from_fn(fan_out, fan_in, |_, _| {
        rng.uniform(-bound, bound)
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// fan_out × fan_in, so a batch row maps through `x · Wᵀ`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(DenseLayer {
            weights: glorot_init(fan_in, fan_out, rng)?,
            bias: vec![0.0; fan_out],
            activation,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    /// z = x·Wᵀ + b followed by the activation.
    pub fn forward(&self, batch: &Matrix) -> Matrix {
        let mut z = batch.matmul_nt(&self.weights);
        z.add_row_vector(&self.bias);
        match self.activation {
            Activation::Sigmoid => z.map(sigmoid),
            Activation::Softmax => softmax_rows(z),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Row-wise softmax with the usual max-subtraction for stability.
fn softmax_rows(mut z: Matrix) -> Matrix {
    for r in 0..z.rows() {
        let row = z.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    z
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropoutLayer {
    pub p: f64,
}

impl DropoutLayer {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid_argument(format!(
                "dropout probability must be in [0,1), got {p}"
            )));
        }
        Ok(DropoutLayer { p })
    }

    /// Inverted-dropout mask: dropped entries are 0, survivors carry the
    /// 1/(1−p) compensation so expected train output equals test output.
    pub fn sample_mask(&self, rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        let keep = 1.0 / (1.0 - self.p);
        Matrix::from_fn(
            rows,
            cols,
            |_, _| if rng.next_f64() < self.p { 0.0 } else { keep },
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    Dropout(DropoutLayer),
}

impl Layer {
    pub fn dense(
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(Layer::Dense(DenseLayer::new(
            fan_in, fan_out, activation, rng,
        )?))
    }

    pub fn dropout(p: f64) -> Result<Self> {
        Ok(Layer::Dropout(DropoutLayer::new(p)?))
    }

    pub fn as_dense(&self) -> Option<&DenseLayer> {
        match self {
            Layer::Dense(d) => Some(d),
            Layer::Dropout(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glorot_respects_bound() {
        let mut rng = Rng::new(7);
        let w = glorot_init(1024, 768, &mut rng).unwrap();
        assert_eq!((w.rows(), w.cols()), (768, 1024));
        let bound = (6.0f64 / (1024.0 + 768.0)).sqrt();
        let max = w.data().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(max <= bound, "{max} exceeds {bound}");
        // Sanity: the draw actually fills the interval, not a sliver of it.
        assert!(max > 0.9 * bound);
    }

    #[test]
    fn glorot_single_weight_within_sqrt3() {
        let mut rng = Rng::new(1);
        let w = glorot_init(1, 1, &mut rng).unwrap();
        assert!(w.get(0, 0).abs() <= 3.0f64.sqrt());
    }

    #[test]
    fn glorot_is_deterministic() {
        let a = glorot_init(20, 10, &mut Rng::new(42)).unwrap();
        let b = glorot_init(20, 10, &mut Rng::new(42)).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn glorot_rejects_zero_dims() {
        assert!(glorot_init(0, 5, &mut Rng::new(0)).is_err());
        assert!(glorot_init(5, 0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn zero_weight_sigmoid_outputs_half() {
        let layer = DenseLayer {
            weights: Matrix::zeros(4, 3),
            bias: vec![0.0; 4],
            activation: Activation::Sigmoid,
        };
        let out = layer.forward(&Matrix::from_vec(
            2,
            3,
            vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0],
        ));
        for &v in out.data() {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let layer = DenseLayer {
            weights: Matrix::zeros(4, 2),
            bias: vec![0.0; 4],
            activation: Activation::Softmax,
        };
        let out = layer.forward(&Matrix::from_vec(1, 2, vec![0.3, 0.7]));
        for &v in out.data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = Rng::new(3);
        let layer = DenseLayer::new(6, 5, Activation::Softmax, &mut rng).unwrap();
        let batch = Matrix::from_fn(8, 6, |_, _| rng.uniform(-4.0, 4.0));
        let out = layer.forward(&batch);
        for r in 0..out.rows() {
            let sum: f64 = out.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(out.row(r).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn dropout_zeroes_expected_fraction() {
        let drop = DropoutLayer::new(0.2).unwrap();
        let mask = drop.sample_mask(100, 100, &mut Rng::new(9));
        let zeroed = mask.data().iter().filter(|&&v| v == 0.0).count();
        let frac = zeroed as f64 / 10_000.0;
        assert!((0.18..=0.22).contains(&frac), "zeroed fraction {frac}");
        // Survivors carry exactly the inverted-dropout scale.
        for &v in mask.data() {
            assert!(v == 0.0 || (v - 1.25).abs() < 1e-15);
        }
    }

    #[test]
    fn dropout_rejects_bad_probability() {
        assert!(DropoutLayer::new(1.0).is_err());
        assert!(DropoutLayer::new(-0.1).is_err());
        assert!(DropoutLayer::new(0.0).is_ok());
    }
}
