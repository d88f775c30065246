//! Radon projections, Radon barcodes (RBC), and the autoencoder-compressed
//! variant (RABC).
//!
//! A projection at angle θ integrates image intensity along lines
//! perpendicular to the direction (cos θ, sin θ). Each pixel's mass is
//! distributed linearly between the two nearest of `n_bins` equal-width
//! bins spanning the projection's full extent, so total intensity is
//! conserved exactly at every angle and angle 0 reproduces plain column
//! sums.

use crate::code::BinaryCode;
use crate::dataset::ImageVector;
use crate::error::{Error, Result};
use crate::hasher::{
    build_encoder, fine_tune, layer_train, EncoderGeometry, FineTuneConfig, PretrainConfig,
};
use crate::matrix::Matrix;
use crate::nn::{Network, OptimizerKind};
use crate::rng::Rng;

pub const DEFAULT_ANGLES: usize = 16;

/// Projections of one image: `n_angles` rows of `n_bins` bins each.
#[derive(Debug, Clone)]
pub struct RadonProjectionSet {
    angles: Vec<f64>,
    projections: Matrix,
}

impl RadonProjectionSet {
    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn n_bins(&self) -> usize {
        self.projections.cols()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Bin values for one angle.
    pub fn projection(&self, angle_index: usize) -> &[f64] {
        self.projections.row(angle_index)
    }

    /// Row-major concatenation of all projections.
    pub fn flatten(&self) -> Vec<f64> {
        self.projections.data().to_vec()
    }
}

/// `n` angles evenly spaced over [0, π).
pub fn default_angles(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| k as f64 * std::f64::consts::PI / n as f64)
        .collect()
}

/// Computes projections at the given angles with `n_bins` bins per angle.
/// The image must be square with non-negative intensities.
pub fn radon_projections_at(
    image: &ImageVector,
    angles: &[f64],
    n_bins: usize,
) -> Result<RadonProjectionSet> {
    if image.width() != image.height() {
        return Err(Error::invalid_argument(format!(
            "projection input must be square, got {}x{}",
            image.width(),
            image.height()
        )));
    }
    if image.width() == 0 || n_bins < 2 || angles.is_empty() {
        return Err(Error::invalid_argument(
            "need a non-empty image, at least two bins, and at least one angle",
        ));
    }
    if image.pixels().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid_argument(
            "projection input intensities must be finite and non-negative",
        ));
    }

    let n = image.width();
    let half = n as f64 / 2.0;
    let mut projections = Matrix::zeros(angles.len(), n_bins);
    for (a, &theta) in angles.iter().enumerate() {
        let (sin, cos) = theta.sin_cos();
        // Half-extent of the support of t over the square; bins cover
        // [-extent, extent] exactly.
        let extent = half * (cos.abs() + sin.abs());
        let bin_width = 2.0 * extent / n_bins as f64;
        let row = projections.row_mut(a);
        for r in 0..n {
            let y = r as f64 + 0.5 - half;
            let y_term = y * sin;
            for c in 0..n {
                let mass = image.get(c, r);
                if mass == 0.0 {
                    continue;
                }
                let t = (c as f64 + 0.5 - half) * cos + y_term;
                let u = (t + extent) / bin_width - 0.5;
                let lo = u.floor();
                let frac = u - lo;
                let i0 = (lo.max(0.0) as usize).min(n_bins - 1);
                let i1 = ((lo + 1.0).max(0.0) as usize).min(n_bins - 1);
                row[i0] += mass * (1.0 - frac);
                row[i1] += mass * frac;
            }
        }
    }
    Ok(RadonProjectionSet {
        angles: angles.to_vec(),
        projections,
    })
}

/// Projections at `n_angles` evenly spaced angles with one bin per pixel
/// column (`n_bins` = image side).
pub fn radon_projections(image: &ImageVector, n_angles: usize) -> Result<RadonProjectionSet> {
    radon_projections_at(image, &default_angles(n_angles), image.width())
}

/// Thresholds each projection at its own median: bins at or above the
/// median become 1. Bits are concatenated projection by projection.
pub fn radon_barcode(set: &RadonProjectionSet) -> BinaryCode {
    let mut bits = Vec::with_capacity(set.n_angles() * set.n_bins());
    for a in 0..set.n_angles() {
        let values = set.projection(a);
        let m = median(values);
        bits.extend(values.iter().map(|&v| v >= m));
    }
    BinaryCode::from_bits(&bits)
}

/// Median as the mean of the two middle order statistics for even lengths.
fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite projections"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Per-dimension min–max scaler fitted on training projections only.
/// Dimensions that were constant in training map to 0; outputs are clipped
/// to [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionScaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl ProjectionScaler {
    pub fn fit(rows: &Matrix) -> Result<Self> {
        if rows.rows() == 0 || rows.cols() == 0 {
            return Err(Error::invalid_argument("cannot fit a scaler on no data"));
        }
        let dim = rows.cols();
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for r in 0..rows.rows() {
            for (d, &v) in rows.row(r).iter().enumerate() {
                min[d] = min[d].min(v);
                max[d] = max[d].max(v);
            }
        }
        Ok(ProjectionScaler { min, max })
    }

    pub fn from_bounds(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.is_empty() || min.len() != max.len() {
            return Err(Error::invalid_argument(
                "scaler bounds must be non-empty and equally long",
            ));
        }
        Ok(ProjectionScaler { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::invalid_argument(format!(
                "scaler fitted on {} dimensions, got {}",
                self.dim(),
                row.len()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(d, &v)| {
                let span = self.max[d] - self.min[d];
                if span > 0.0 {
                    ((v - self.min[d]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn apply(&self, rows: &Matrix) -> Result<Matrix> {
        let mut out = Vec::with_capacity(rows.rows() * rows.cols());
        for r in 0..rows.rows() {
            out.extend(self.apply_row(rows.row(r))?);
        }
        Ok(Matrix::from_vec(rows.rows(), rows.cols(), out))
    }
}

/// Training setup for the autoencoder-compressed barcode. The default
/// geometry compresses 16×256 flattened projections to 2048 bits; both
/// the geometry and the epoch counts scale down for small experiments.
#[derive(Debug, Clone)]
pub struct RabcConfig {
    pub geometry: EncoderGeometry,
    pub pretrain: PretrainConfig,
    pub finetune: FineTuneConfig,
}

impl Default for RabcConfig {
    fn default() -> Self {
        let finetune = FineTuneConfig {
            epochs: 2200,
            optimizer: OptimizerKind::Adam,
            ..FineTuneConfig::default()
        };
        RabcConfig {
            geometry: EncoderGeometry::new(vec![(4096, 2048)]).expect("static geometry"),
            pretrain: PretrainConfig::default(),
            finetune,
        }
    }
}

/// A trained projection compressor with the loss curves of both stages.
/// `pretrain_histories` holds one curve per encoder pair; these measure
/// reconstruction learning directly. The fine-tune curve starts from the
/// pretrained weights, so it typically moves little — it is reported for
/// monitoring, not as the headline reduction.
#[derive(Debug)]
pub struct RabcModel {
    pub encoder: Network,
    pub full: Network,
    pub pretrain_histories: Vec<Vec<f64>>,
    pub finetune_history: Vec<f64>,
}

/// Trains the compression autoencoder on scaled projection rows.
pub fn train_rabc(scaled: &Matrix, config: &RabcConfig, rng: &mut Rng) -> Result<RabcModel> {
    let stack = layer_train(scaled, &config.geometry, &config.pretrain, rng)?;
    let pretrain_histories = stack.histories.clone();
    let (full, finetune_history) =
        fine_tune(scaled, &config.geometry, &stack, &config.finetune, rng)?;
    let encoder = build_encoder(&full)?;
    Ok(RabcModel {
        encoder,
        full,
        pretrain_histories,
        finetune_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_image(n: usize, v: f64) -> ImageVector {
        ImageVector::new(n, n, vec![v; n * n]).unwrap()
    }

    fn random_image(n: usize, rng: &mut Rng) -> ImageVector {
        let pixels = (0..n * n).map(|_| rng.next_f64()).collect();
        ImageVector::new(n, n, pixels).unwrap()
    }

    #[test]
    fn angle_zero_reproduces_column_sums() {
        let mut rng = Rng::new(11);
        let img = random_image(32, &mut rng);
        let set = radon_projections_at(&img, &[0.0], 32).unwrap();
        for c in 0..32 {
            let col: f64 = (0..32).map(|r| img.get(c, r)).sum();
            assert!(
                (set.projection(0)[c] - col).abs() < 1e-12,
                "column {c}: {} vs {col}",
                set.projection(0)[c]
            );
        }
    }

    #[test]
    fn right_angle_reproduces_row_sums() {
        let mut rng = Rng::new(12);
        let img = random_image(16, &mut rng);
        let set = radon_projections_at(&img, &[std::f64::consts::FRAC_PI_2], 16).unwrap();
        for r in 0..16 {
            let row_sum: f64 = (0..16).map(|c| img.get(c, r)).sum();
            assert!((set.projection(0)[r] - row_sum).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_image_projects_constant_at_zero() {
        let img = constant_image(256, 1.0);
        let set = radon_projections_at(&img, &[0.0], 256).unwrap();
        for &v in set.projection(0) {
            assert!((v - 256.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mass_is_conserved_at_every_angle() {
        let mut rng = Rng::new(5);
        let img = random_image(64, &mut rng);
        let total: f64 = img.pixels().iter().sum();
        let set = radon_projections(&img, 16).unwrap();
        for a in 0..set.n_angles() {
            let sum: f64 = set.projection(a).iter().sum();
            assert!(
                (sum - total).abs() / total < 1e-12,
                "angle {a}: {sum} vs {total}"
            );
        }
    }

    #[test]
    fn center_impulse_peaks_mid_projection() {
        let n = 64;
        let mut pixels = vec![0.0; n * n];
        pixels[(n / 2) * n + n / 2] = 1.0;
        let img = ImageVector::new(n, n, pixels).unwrap();
        let set = radon_projections(&img, 16).unwrap();
        for a in 0..set.n_angles() {
            let peak = set
                .projection(a)
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .unwrap()
                .0 as i64;
            let mid = (n / 2) as i64;
            assert!(
                (peak - mid).abs() <= 1,
                "angle {a}: peak bin {peak} far from center {mid}"
            );
        }
    }

    #[test]
    fn rotating_the_image_shifts_the_projection_angle() {
        // A quarter turn permutes pixels exactly, so the projection of the
        // rotated image at θ must track the original at θ + π/2.
        let n = 64;
        let mut rng = Rng::new(21);
        let mut pixels = vec![0.0; n * n];
        // Smooth anisotropic blob off center.
        for r in 0..n {
            for c in 0..n {
                let x = (c as f64 - 24.0) / 9.0;
                let y = (r as f64 - 38.0) / 16.0;
                pixels[r * n + c] = (-0.5 * (x * x + y * y)).exp() + 0.01 * rng.next_f64();
            }
        }
        let img = ImageVector::new(n, n, pixels.clone()).unwrap();
        let mut rotated = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                // (x, y) -> (y, N-1-x): counter-clockwise quarter turn.
                rotated[(n - 1 - c) * n + r] = pixels[r * n + c];
            }
        }
        let rot = ImageVector::new(n, n, rotated).unwrap();

        let base = radon_projections(&img, 8).unwrap();
        let turned = radon_projections(&rot, 8).unwrap();
        // With (x, y) -> (y, -x), the rotated image's offset at angle θ
        // equals the original's at θ + π/2, so projection k of the turned
        // image tracks projection k+4 of the original bin for bin.
        for k in 0..4 {
            let a = base.projection(k + 4);
            let b = turned.projection(k);
            let corr = pearson(a, b);
            assert!(corr >= 0.98, "angle pair {k}: correlation {corr:.4}");
        }
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (&x, &y) in a.iter().zip(b) {
            cov += (x - ma) * (y - mb);
            va += (x - ma).powi(2);
            vb += (y - mb).powi(2);
        }
        cov / (va.sqrt() * vb.sqrt())
    }

    #[test]
    fn rejects_bad_inputs() {
        let img = ImageVector::new(4, 2, vec![0.0; 8]).unwrap();
        assert!(radon_projections(&img, 4).is_err());
        let neg = ImageVector::new(2, 2, vec![0.5, -0.1, 0.2, 0.3]).unwrap();
        assert!(radon_projections(&neg, 4).is_err());
        let ok = constant_image(4, 1.0);
        assert!(radon_projections_at(&ok, &[], 4).is_err());
        assert!(radon_projections_at(&ok, &[0.0], 1).is_err());
    }

    #[test]
    fn barcode_median_rule_on_a_known_projection() {
        // Values [1,2,3,4]: median 2.5, so the barcode is 0,0,1,1.
        let set = RadonProjectionSet {
            angles: vec![0.0],
            projections: Matrix::from_vec(1, 4, vec![1.0, 2.0, 3.0, 4.0]),
        };
        let code = radon_barcode(&set);
        assert_eq!(code.len(), 4);
        assert_eq!(
            (code.bit(0), code.bit(1), code.bit(2), code.bit(3)),
            (false, false, true, true)
        );
    }

    #[test]
    fn constant_projection_thresholds_to_all_ones() {
        let set = RadonProjectionSet {
            angles: vec![0.0],
            projections: Matrix::from_vec(1, 6, vec![2.0; 6]),
        };
        assert_eq!(radon_barcode(&set).ones(), 6);
    }

    #[test]
    fn each_projection_contributes_half_ones() {
        // Continuous random intensities make ties measure-zero, so an
        // even-length projection splits exactly in half at its median.
        let mut rng = Rng::new(33);
        let img = random_image(64, &mut rng);
        let set = radon_projections(&img, 16).unwrap();
        let code = radon_barcode(&set);
        assert_eq!(code.len(), 1024);
        assert_eq!(code.ones(), 512);
        for a in 0..16 {
            let ones = (0..64).filter(|&b| code.bit(a * 64 + b)).count();
            assert_eq!(ones, 32, "projection {a}");
        }
    }

    #[test]
    fn barcode_ignores_global_intensity_scale() {
        let mut rng = Rng::new(8);
        let img = random_image(32, &mut rng);
        let scaled =
            ImageVector::new(32, 32, img.pixels().iter().map(|&v| v * 2.5).collect()).unwrap();
        let a = radon_barcode(&radon_projections(&img, 8).unwrap());
        let b = radon_barcode(&radon_projections(&scaled, 8).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn scaler_maps_training_bounds_to_unit_interval() {
        let rows = Matrix::from_vec(3, 2, vec![1.0, 5.0, 3.0, 5.0, 2.0, 5.0]);
        let scaler = ProjectionScaler::fit(&rows).unwrap();
        let scaled = scaler.apply(&rows).unwrap();
        assert_eq!(scaled.get(0, 0), 0.0);
        assert_eq!(scaled.get(1, 0), 1.0);
        assert!((scaled.get(2, 0) - 0.5).abs() < 1e-15);
        // Constant dimension maps to 0.
        for r in 0..3 {
            assert_eq!(scaled.get(r, 1), 0.0);
        }
        // Out-of-range values from a held-out set are clipped.
        let test = Matrix::from_vec(1, 2, vec![9.0, -1.0]);
        let clipped = scaler.apply(&test).unwrap();
        assert_eq!(clipped.get(0, 0), 1.0);
        assert_eq!(clipped.get(0, 1), 0.0);
        // Dimension mismatch is an error.
        assert!(scaler.apply_row(&[1.0]).is_err());
    }

    #[test]
    fn rabc_training_compresses_projections() {
        // Reduced-resolution stand-in for the full pipeline: 500 synthetic
        // projection sets, single-pair autoencoder, 50 epochs per stage.
        let imgs = crate::dataset::generate_synthetic(500, 5, 32, 17).unwrap();
        let mut rows = Vec::new();
        for im in &imgs {
            let v = crate::dataset::normalize(&im.image);
            let set = radon_projections_at(&v, &default_angles(4), 32).unwrap();
            rows.extend(set.flatten());
        }
        let raw = Matrix::from_vec(500, 128, rows);
        let scaler = ProjectionScaler::fit(&raw).unwrap();
        let scaled = scaler.apply(&raw).unwrap();

        let mut config = RabcConfig {
            geometry: EncoderGeometry::new(vec![(128, 32)]).unwrap(),
            ..RabcConfig::default()
        };
        config.pretrain.epochs = 50;
        config.finetune.epochs = 50;
        let mut rng = Rng::new(4);
        let model = train_rabc(&scaled, &config, &mut rng).unwrap();
        assert_eq!(model.encoder.output_dim(), Some(32));

        // Reconstruction learning happens in the de-noising stage. The
        // synthetic projections carry irreducible sensor noise that bounds
        // the achievable loss, so require a 20% drop: enough to prove the
        // stage learns, low enough to clear the noise floor.
        let pre = &model.pretrain_histories[0];
        let (first, last) = (pre[0], *pre.last().unwrap());
        assert!(
            last <= 0.8 * first,
            "pretrain loss {first:.4} -> {last:.4} fell less than 20%"
        );
        // Fine-tuning starts from those weights, so it sits near the
        // floor already; it must at least not regress.
        let ft = &model.finetune_history;
        assert!(
            *ft.last().unwrap() <= ft[0] * 1.02,
            "fine-tune regressed: {:.4} -> {:.4}",
            ft[0],
            ft.last().unwrap()
        );
    }
}
