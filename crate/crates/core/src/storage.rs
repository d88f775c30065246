//! On-disk formats. Binary containers are little-endian throughout and
//! open with a 5-byte magic string; numbers round-trip bit-exactly.
//!
//! Model container, magic `DDAH1`:
//!
//! ```text
//! bytes 0..5      b"DDAH1"
//! u32             layer count
//! per layer, an 18-byte record:
//!     u8          kind: 0 dense+sigmoid, 1 dense+softmax, 2 dropout
//!     u8          reserved (zero)
//!     u32         fan_in   (zero for dropout)
//!     u32         fan_out  (zero for dropout)
//!     f64         dropout probability (zero for dense)
//! then, for each dense layer in record order:
//!     fan_out × fan_in weights, f64 row-major
//!     fan_out biases, f64
//! ```
//!
//! Scaler container, magic `DDAS1`: u32 dimension, then the per-dimension
//! minima and maxima as f64 runs.
//!
//! Projection container, magic `DDAP1`: u32 record count, u32 dimension,
//! then per record a u32 id byte length, the UTF-8 id, and the projection
//! values as f64.
//!
//! Code files are line-oriented text: `image_id k hexcode` per record,
//! where `k` is the code length in bits and the hex string packs the bits
//! most-significant-bit first. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;

use crate::code::BinaryCode;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Activation, DenseLayer, DropoutLayer, Layer, Network};
use crate::radon::ProjectionScaler;

const MODEL_MAGIC: &[u8; 5] = b"DDAH1";
const SCALER_MAGIC: &[u8; 5] = b"DDAS1";
const PROJECTION_MAGIC: &[u8; 5] = b"DDAP1";

const KIND_DENSE_SIGMOID: u8 = 0;
const KIND_DENSE_SOFTMAX: u8 = 1;
const KIND_DROPOUT: u8 = 2;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: String,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], path: &Path) -> Self {
        Reader {
            bytes,
            pos: 0,
            name: path.display().to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(format!(
                "{}: truncated (wanted {n} bytes at offset {}, file holds {})",
                self.name,
                self.pos,
                self.bytes.len()
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn magic(&mut self, expected: &[u8; 5]) -> Result<()> {
        let found = self.take(5)?;
        if found != expected {
            return Err(Error::format(format!(
                "{}: expected magic {:?}, found {:?}",
                self.name,
                String::from_utf8_lossy(expected),
                String::from_utf8_lossy(found)
            )));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8-byte slice")))
    }

    fn f64_run(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n * 8)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(format!(
                "{}: {} unexpected trailing bytes",
                self.name,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a network — architecture and parameters — to `path`.
pub fn save_model(path: &Path, network: &Network) -> Result<()> {
    let layers = network.layers();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for layer in layers {
        match layer {
            Layer::Dense(d) => {
                let kind = match d.activation {
                    Activation::Sigmoid => KIND_DENSE_SIGMOID,
                    Activation::Softmax => KIND_DENSE_SOFTMAX,
                };
                out.push(kind);
                out.push(0);
                out.extend_from_slice(&(d.fan_in() as u32).to_le_bytes());
                out.extend_from_slice(&(d.fan_out() as u32).to_le_bytes());
                out.extend_from_slice(&0.0f64.to_le_bytes());
            }
            Layer::Dropout(drop) => {
                out.push(KIND_DROPOUT);
                out.push(0);
                out.extend_from_slice(&0u32.to_le_bytes());
                out.extend_from_slice(&0u32.to_le_bytes());
                out.extend_from_slice(&drop.p.to_le_bytes());
            }
        }
    }
    for layer in layers {
        if let Layer::Dense(d) = layer {
            push_f64s(&mut out, d.weights.data());
            push_f64s(&mut out, &d.bias);
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a network back; the byte layout is validated exhaustively, so a
/// loaded model is structurally sound.
pub fn load_model(path: &Path) -> Result<Network> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    r.magic(MODEL_MAGIC)?;
    let count = r.u32()? as usize;
    if count == 0 {
        return Err(Error::format(format!(
            "{}: model holds no layers",
            path.display()
        )));
    }

    enum Record {
        Dense(usize, usize, Activation),
        Dropout(f64),
    }
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let kind = r.u8()?;
        let _reserved = r.u8()?;
        let fan_in = r.u32()? as usize;
        let fan_out = r.u32()? as usize;
        let p = r.f64()?;
        match kind {
            KIND_DENSE_SIGMOID | KIND_DENSE_SOFTMAX => {
                if fan_in == 0 || fan_out == 0 {
                    return Err(Error::format(format!(
                        "{}: layer {i} has zero dimensions",
                        path.display()
                    )));
                }
                let act = if kind == KIND_DENSE_SIGMOID {
                    Activation::Sigmoid
                } else {
                    Activation::Softmax
                };
                records.push(Record::Dense(fan_in, fan_out, act));
            }
            KIND_DROPOUT => records.push(Record::Dropout(p)),
            other => {
                return Err(Error::format(format!(
                    "{}: layer {i} has unknown kind tag {other}",
                    path.display()
                )));
            }
        }
    }

    let mut layers = Vec::with_capacity(count);
    for record in &records {
        match *record {
            Record::Dense(fan_in, fan_out, act) => {
                let weights = r.f64_run(fan_out * fan_in)?;
                let bias = r.f64_run(fan_out)?;
                layers.push(Layer::Dense(DenseLayer {
                    weights: Matrix::from_vec(fan_out, fan_in, weights),
                    bias,
                    activation: act,
                }));
            }
            Record::Dropout(p) => layers.push(Layer::Dropout(DropoutLayer::new(p)?)),
        }
    }
    r.finish()?;
    Network::new(layers)
}

/// Serializes a fitted min–max scaler to `path`.
pub fn save_scaler(path: &Path, scaler: &ProjectionScaler) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(SCALER_MAGIC);
    out.extend_from_slice(&(scaler.dim() as u32).to_le_bytes());
    push_f64s(&mut out, scaler.min());
    push_f64s(&mut out, scaler.max());
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_scaler(path: &Path) -> Result<ProjectionScaler> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    r.magic(SCALER_MAGIC)?;
    let dim = r.u32()? as usize;
    let min = r.f64_run(dim)?;
    let max = r.f64_run(dim)?;
    r.finish()?;
    ProjectionScaler::from_bounds(min, max)
}

/// Writes per-image projection vectors; all records must share one
/// dimension.
pub fn save_projections(path: &Path, records: &[(String, Vec<f64>)]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid_argument("no projection records to save"));
    }
    let dim = records[0].1.len();
    let mut out = Vec::new();
    out.extend_from_slice(PROJECTION_MAGIC);
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for (id, values) in records {
        if values.len() != dim {
            return Err(Error::invalid_argument(format!(
                "projection for {id:?} has {} values, expected {dim}",
                values.len()
            )));
        }
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        push_f64s(&mut out, values);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_projections(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    r.magic(PROJECTION_MAGIC)?;
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let id_len = r.u32()? as usize;
        let id = String::from_utf8(r.take(id_len)?.to_vec())
            .map_err(|_| Error::format(format!("{}: id is not UTF-8", path.display())))?;
        let values = r.f64_run(dim)?;
        records.push((id, values));
    }
    r.finish()?;
    Ok(records)
}

/// Writes a code file. `header_lines` are emitted first as `#` comments —
/// callers use them to record the configuration that produced the codes.
pub fn save_codes(
    path: &Path,
    codes: &[(String, BinaryCode)],
    header_lines: &[String],
) -> Result<()> {
    let mut text = String::new();
    for line in header_lines {
        writeln!(text, "# {line}").expect("string write");
    }
    for (id, code) in codes {
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::invalid_argument(format!(
                "image id {id:?} cannot be written as a whitespace-separated token"
            )));
        }
        writeln!(text, "{id} {} {}", code.len(), code.to_hex()).expect("string write");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_codes(path: &Path) -> Result<Vec<(String, BinaryCode)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut codes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(format!(
                "{}:{}: expected `image_id k hexcode`",
                path.display(),
                lineno + 1
            )));
        }
        let k: usize = fields[1].parse().map_err(|_| {
            Error::parse(format!(
                "{}:{}: bad code length {:?}",
                path.display(),
                lineno + 1,
                fields[1]
            ))
        })?;
        let code = BinaryCode::from_hex(fields[2], k)
            .map_err(|e| Error::parse(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        codes.push((fields[0].to_string(), code));
    }
    if codes.is_empty() {
        return Err(Error::parse(format!(
            "{}: code file holds no records",
            path.display()
        )));
    }
    Ok(codes)
}
