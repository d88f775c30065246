//! Binary cross-entropy over batches.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Predictions are clamped into [BCE_CLIP, 1−BCE_CLIP] before the logs so
/// saturated sigmoids cannot produce infinities.
pub const BCE_CLIP: f64 = 1e-7;

fn check_shapes(prediction: &Matrix, target: &Matrix) -> Result<()> {
    if prediction.rows() != target.rows() || prediction.cols() != target.cols() {
        return Err(Error::invalid_argument(format!(
            "prediction is {}x{} but target is {}x{}",
            prediction.rows(),
            prediction.cols(),
            target.rows(),
            target.cols(),
        )));
    }
    Ok(())
}

/// Mean over the batch of the per-sample sum −Σ[t·ln p + (1−t)·ln(1−p)].
pub fn bce_loss(prediction: &Matrix, target: &Matrix) -> Result<f64> {
    check_shapes(prediction, target)?;
    if prediction.rows() == 0 {
        return Err(Error::invalid_argument("empty batch has no loss"));
    }
    let mut total = 0.0;
    for (&p, &t) in prediction.data().iter().zip(target.data()) {
        let p = p.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
        total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    Ok(total / prediction.rows() as f64)
}

/// Gradient of `bce_loss` with respect to the predictions:
/// (p−t) / (p(1−p)), scaled by 1/batch for the mean.
pub fn bce_grad(prediction: &Matrix, target: &Matrix) -> Result<Matrix> {
    check_shapes(prediction, target)?;
    let scale = 1.0 / prediction.rows() as f64;
    let mut out = prediction.clone();
    for (g, &t) in out.data_mut().iter_mut().zip(target.data()) {
        let p = g.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
        *g = scale * (p - t) / (p * (1.0 - p));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_of_all_halves_is_four_ln_two() {
        let half = Matrix::from_vec(3, 4, vec![0.5; 12]);
        let loss = bce_loss(&half, &half).unwrap();
        assert!((loss - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_loss_is_clip_bounded() {
        let p = Matrix::from_vec(1, 4, vec![0.0, 1.0, 1.0, 0.0]);
        let loss = bce_loss(&p, &p).unwrap();
        // Each saturated unit contributes −ln(1−1e-7) ≈ 1e-7 after clamping.
        assert!(loss > 0.0);
        assert!(loss < 5e-7, "loss {loss}");
    }

    #[test]
    fn loss_is_minimized_at_the_target() {
        let t = Matrix::from_vec(1, 3, vec![0.2, 0.5, 0.9]);
        let at_target = bce_loss(&t, &t).unwrap();
        for delta in [-0.05, 0.05] {
            let p = t.map(|v| v + delta);
            assert!(bce_loss(&p, &t).unwrap() > at_target);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = Matrix::from_vec(2, 3, vec![0.3, 0.6, 0.45, 0.8, 0.2, 0.55]);
        let t = Matrix::from_vec(2, 3, vec![1.0, 0.0, 0.5, 1.0, 0.0, 0.25]);
        let grad = bce_grad(&p, &t).unwrap();
        let eps = 1e-6;
        for i in 0..6 {
            let mut hi = p.clone();
            hi.data_mut()[i] += eps;
            let mut lo = p.clone();
            lo.data_mut()[i] -= eps;
            let fd = (bce_loss(&hi, &t).unwrap() - bce_loss(&lo, &t).unwrap()) / (2.0 * eps);
            assert!(
                (fd - grad.data()[i]).abs() < 1e-6,
                "unit {i}: {fd} vs {}",
                grad.data()[i]
            );
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(3, 2);
        assert!(bce_loss(&a, &b).is_err());
        assert!(bce_grad(&a, &b).is_err());
    }
}
