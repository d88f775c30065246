//! Small-sample summary statistics for benchmark reporting.

use crate::error::{Error, Result};

/// Two-sided 95% Student-t critical values for 1..=30 degrees of freedom.
const T_95: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Half-width of the 95% confidence interval for the mean.
    pub ci95: f64,
}

/// Sample mean and 95% confidence half-width via the Student-t
/// distribution (normal approximation beyond 30 degrees of freedom).
/// Needs at least two samples.
pub fn mean_and_ci95(samples: &[f64]) -> Result<Summary> {
    if samples.len() < 2 {
        return Err(Error::invalid_argument(format!(
            "confidence interval needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    let t = if df <= 30 { T_95[df - 1] } else { 1.96 };
    Ok(Summary {
        n,
        mean,
        ci95: t * (var / n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_checked_interval() {
        // Samples 1..=5: mean 3, sample variance 2.5, se = sqrt(0.5),
        // t(4) = 2.776.
        let s = mean_and_ci95(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert!((s.ci95 - 2.776 * 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_samples_have_zero_width() {
        let s = mean_and_ci95(&[4.2; 20]).unwrap();
        assert!((s.mean - 4.2).abs() < 1e-12);
        assert!(s.ci95 < 1e-12);
        assert_eq!(s.n, 20);
    }

    #[test]
    fn twenty_runs_use_t19() {
        let samples: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let s = mean_and_ci95(&samples).unwrap();
        let mean = 9.5;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 19.0;
        assert!((s.ci95 - 2.093 * (var / 20.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_samples() {
        assert!(mean_and_ci95(&[]).is_err());
        assert!(mean_and_ci95(&[1.0]).is_err());
    }
}
