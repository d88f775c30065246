//! Deterministic synthetic corpus generator: each class renders a distinct
//! anti-aliased shape family (disk, ring, bar, cross, stripes) with small
//! per-image jitter, so intra-class images stay closer to each other than
//! to other classes.

use crate::dataset::image::RawImage;
use crate::error::{Error, Result};
use crate::irma::IrmaCode;
use crate::rng::Rng;

/// One generated image together with its labels.
#[derive(Debug, Clone)]
pub struct SyntheticImage {
    pub id: String,
    pub class: usize,
    pub image: RawImage,
    pub irma: IrmaCode,
}

const BACKGROUND: f64 = 30.0;
const FOREGROUND: f64 = 220.0;
const NOISE_SPAN: f64 = 45.0;

/// Generates `n` images of `size`×`size` pixels across `classes` classes.
/// Image `i` belongs to class `i % classes`, so counts stay balanced. The
/// same arguments always produce byte-identical output.
pub fn generate_synthetic(
    n: usize,
    classes: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<SyntheticImage>> {
    if n == 0 || classes == 0 {
        return Err(Error::invalid_argument(
            "need at least one image and one class",
        ));
    }
    if classes > n {
        return Err(Error::invalid_argument(format!(
            "{classes} classes cannot be covered by {n} images"
        )));
    }
    if size < 8 {
        return Err(Error::invalid_argument("image side must be at least 8"));
    }

    let width = (n - 1).to_string().len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        let mut rng = Rng::derive(seed, i as u64);
        let image = render_class(class, size, &mut rng);
        out.push(SyntheticImage {
            id: format!("syn{i:0width$}"),
            class,
            image,
            irma: class_code(class),
        });
    }
    Ok(out)
}

/// Hierarchical label for a class: leading characters encode the coarse
/// shape family and size tier, trailing characters the exact class, so
/// related classes share code prefixes.
pub fn class_code(class: usize) -> IrmaCode {
    const ALPHABET: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";
    let ch = |x: usize| ALPHABET[x % 36] as char;
    let kind = class % 5;
    let tier = (class / 5) % 6;
    let text = format!(
        "{}{}{}{}-{}{}{}-{}{}{}-{}{}{}",
        ch(kind),
        ch(tier),
        ch(class / 36),
        ch(class),
        ch(kind),
        ch(class / 36),
        ch(class),
        ch(tier),
        ch(class / 36),
        ch(class),
        ch(kind + tier),
        ch(class / 36),
        ch(class),
    );
    IrmaCode::parse(&text).expect("generated label is well-formed")
}

fn render_class(class: usize, size: usize, rng: &mut Rng) -> RawImage {
    let kind = class % 5;
    let tier = (class / 5) % 6;
    let s = size as f64;

    // Class geometry, then a substantial per-image jitter on top of it:
    // retrieval should have to cope with real within-class spread.
    let base_radius = s * (0.22 + 0.04 * tier as f64);
    let base_angle = ((class * 37) % 180) as f64 * std::f64::consts::PI / 180.0;
    let cx = s / 2.0 + rng.uniform(-0.10, 0.10) * s;
    let cy = s / 2.0 + rng.uniform(-0.10, 0.10) * s;
    let radius = base_radius * rng.uniform(0.85, 1.15);
    let angle = base_angle + rng.uniform(-0.25, 0.25);
    let contrast = rng.uniform(0.75, 1.10);

    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let px = x as f64 + 0.5 - cx;
            let py = y as f64 + 0.5 - cy;
            let d = signed_distance(kind, px, py, radius, angle, s);
            // ~1px soft edge: 1 well inside the shape, 0 well outside.
            let coverage = smoothstep(0.75, -0.75, d);
            let noise = rng.uniform(-NOISE_SPAN, NOISE_SPAN);
            let v = BACKGROUND + (FOREGROUND - BACKGROUND) * contrast * coverage + noise;
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    // Occlusion artifacts in the spirit of radiograph markers and
    // collimation bars: up to two rectangles blotting out what they cover.
    let patches = rng.below(3);
    for _ in 0..patches {
        let w = ((size as f64 * rng.uniform(0.12, 0.28)).round() as usize).clamp(1, size - 1);
        let h = ((size as f64 * rng.uniform(0.12, 0.28)).round() as usize).clamp(1, size - 1);
        let x0 = rng.below(size - w);
        let y0 = rng.below(size - h);
        let level = if rng.next_f64() < 0.5 { 5u8 } else { 245u8 };
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                pixels[y * size + x] = level;
            }
        }
    }
    RawImage::new(size, size, pixels).expect("square image")
}

fn signed_distance(kind: usize, px: f64, py: f64, r: f64, angle: f64, side: f64) -> f64 {
    // Rotate into the shape's frame.
    let (sin, cos) = angle.sin_cos();
    let qx = px * cos + py * sin;
    let qy = -px * sin + py * cos;
    match kind {
        0 => (px * px + py * py).sqrt() - r,
        1 => {
            let d = (px * px + py * py).sqrt();
            (d - r).abs() - r * 0.35
        }
        2 => box_distance(qx, qy, r, r * 0.4),
        3 => box_distance(qx, qy, r, r * 0.3).min(box_distance(qx, qy, r * 0.3, r)),
        _ => {
            // Parallel stripes across the whole frame, half duty cycle.
            let period = (side / 4.0).max(4.0);
            let phase = (qx / period).rem_euclid(1.0);
            (phase - 0.5).abs() * period - period * 0.25
        }
    }
}

fn box_distance(qx: f64, qy: f64, half_w: f64, half_h: f64) -> f64 {
    let dx = qx.abs() - half_w;
    let dy = qy.abs() - half_h;
    let outside = (dx.max(0.0).powi(2) + dy.max(0.0).powi(2)).sqrt();
    outside + dx.max(dy).min(0.0)
}

fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}
