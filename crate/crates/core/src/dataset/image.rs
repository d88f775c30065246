//! Grayscale image loading (PGM, PNG), bilinear resizing, and the
//! [0,1]-normalized flattened form the networks consume.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid_argument("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid_argument(format!(
                "{} pixels cannot form a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(RawImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Flattened row-major image with intensities in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVector {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl ImageVector {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::invalid_argument(format!(
                "{} values cannot form a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(ImageVector {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Stacks image vectors into a matrix, one image per row.
pub fn to_rows(images: &[ImageVector]) -> Result<Matrix> {
    if images.is_empty() {
        return Err(Error::invalid_argument("no images to stack"));
    }
    let dim = images[0].len();
    let mut data = Vec::with_capacity(images.len() * dim);
    for (i, img) in images.iter().enumerate() {
        if img.len() != dim {
            return Err(Error::invalid_argument(format!(
                "image {i} has {} pixels, expected {dim}",
                img.len()
            )));
        }
        data.extend_from_slice(img.pixels());
    }
    Ok(Matrix::from_vec(images.len(), dim, data))
}

/// Loads a grayscale image. Portable graymaps (P5 binary / P2 ASCII) are
/// parsed directly; PNG goes through the decoder and is converted to
/// 8-bit luma.
pub fn load_grayscale(path: &Path) -> Result<RawImage> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png") => load_png(path),
        _ => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_pgm(&bytes).map_err(|e| match e {
                Error::Format(msg) => Error::format(format!("{}: {msg}", path.display())),
                other => other,
            })
        }
    }
}

fn load_png(path: &Path) -> Result<RawImage> {
    let img = image::open(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?
        .into_luma8();
    RawImage::new(img.width() as usize, img.height() as usize, img.into_raw())
}

/// Parses P5 (binary) and P2 (ASCII) portable graymaps with maxval ≤ 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<RawImage> {
    let mut pos = 0;

    // Header tokens are separated by whitespace; '#' starts a comment that
    // runs to end of line.
    let next_token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::format("truncated graymap header".to_string()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(&mut pos)?;
    if magic != "P5" && magic != "P2" {
        return Err(Error::format(format!(
            "not a graymap (magic {magic:?}, expected P5 or P2)"
        )));
    }
    let width: usize = next_token(&mut pos)?
        .parse()
        .map_err(|_| Error::format("bad width".to_string()))?;
    let height: usize = next_token(&mut pos)?
        .parse()
        .map_err(|_| Error::format("bad height".to_string()))?;
    let maxval: usize = next_token(&mut pos)?
        .parse()
        .map_err(|_| Error::format("bad maxval".to_string()))?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(format!(
            "maxval {maxval} unsupported (expected 1..=255)"
        )));
    }

    let count = width * height;
    let pixels = if magic == "P5" {
        // Exactly one whitespace byte separates the header from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::format("missing raster separator".to_string()));
        }
        pos += 1;
        if bytes.len() - pos < count {
            return Err(Error::format(format!(
                "raster holds {} bytes, expected {count}",
                bytes.len() - pos
            )));
        }
        bytes[pos..pos + count].to_vec()
    } else {
        let mut pixels = Vec::with_capacity(count);
        for _ in 0..count {
            let v: usize = next_token(&mut pos)?
                .parse()
                .map_err(|_| Error::format("bad ASCII pixel".to_string()))?;
            if v > maxval {
                return Err(Error::format(format!("pixel {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as u8);
        }
        pixels
    };

    // Non-255 maxvals are rescaled so full intensity is always 255.
    let pixels = if maxval == 255 {
        pixels
    } else {
        pixels
            .into_iter()
            .map(|v| ((v as usize * 255 + maxval / 2) / maxval) as u8)
            .collect()
    };
    RawImage::new(width, height, pixels)
}

/// Writes a binary (P5) graymap.
pub fn save_pgm(path: &Path, image: &RawImage) -> Result<()> {
    let mut out = Vec::with_capacity(image.pixels().len() + 32);
    out.extend_from_slice(format!("P5\n{} {}\n255\n", image.width(), image.height()).as_bytes());
    out.extend_from_slice(image.pixels());
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Bilinear resize with edge clamping. Output pixel centers map back to
/// source coordinates (d + 0.5)·scale − 0.5.
pub fn resize_bilinear(image: &RawImage, target_w: usize, target_h: usize) -> Result<RawImage> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::invalid_argument(
            "target dimensions must be positive",
        ));
    }
    if target_w == image.width() && target_h == image.height() {
        return Ok(image.clone());
    }
    let scale_x = image.width() as f64 / target_w as f64;
    let scale_y = image.height() as f64 / target_h as f64;
    let mut pixels = Vec::with_capacity(target_w * target_h);
    for y in 0..target_h {
        let sy = ((y as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (image.height() - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(image.height() - 1);
        let fy = sy - y0 as f64;
        for x in 0..target_w {
            let sx = ((x as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (image.width() - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(image.width() - 1);
            let fx = sx - x0 as f64;
            let top = f64::from(image.get(x0, y0)) * (1.0 - fx) + f64::from(image.get(x1, y0)) * fx;
            let bottom =
                f64::from(image.get(x0, y1)) * (1.0 - fx) + f64::from(image.get(x1, y1)) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    RawImage::new(target_w, target_h, pixels)
}

/// Divides by 255 and flattens row-major.
pub fn normalize(image: &RawImage) -> ImageVector {
    ImageVector {
        width: image.width(),
        height: image.height(),
        pixels: image
            .pixels()
            .iter()
            .map(|&v| f64::from(v) / 255.0)
            .collect(),
    }
}

/// The full preprocessing step: load, square-resize, normalize.
pub fn preprocess(path: &Path, side: usize) -> Result<ImageVector> {
    let raw = load_grayscale(path)?;
    let resized = resize_bilinear(&raw, side, side)?;
    Ok(normalize(&resized))
}
