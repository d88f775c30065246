//! Fixed-length packed bit vectors and Hamming distance.
//!
//! Bit i of a code lives in byte i/8 at position 7−(i mod 8) — MSB-first,
//! so the hex dump of a code reads left-to-right like the bit string.
//! Trailing pad bits in the last byte are always zero, which lets distance
//! computations run over whole bytes without masking.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    bytes: Vec<u8>,
    len: usize,
}

impl BinaryCode {
    pub fn zeros(len: usize) -> Self {
        BinaryCode {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut code = BinaryCode::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                code.set_bit(i, true);
            }
        }
        code
    }

    /// Wraps packed bytes, validating the byte count and that pad bits in
    /// the final byte are zero.
    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::invalid_argument(format!(
                "{} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        let pad = bytes.len() * 8 - len;
        if pad > 0 {
            let mask = (1u16 << pad) - 1;
            if u16::from(bytes[bytes.len() - 1]) & mask != 0 {
                return Err(Error::invalid_argument("trailing pad bits must be zero"));
            }
        }
        Ok(BinaryCode { bytes, len })
    }

    /// Number of bits.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit {i} out of range for {}-bit code",
            self.len
        );
        self.bytes[i / 8] >> (7 - i % 8) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit {i} out of range for {}-bit code",
            self.len
        );
        let mask = 1u8 << (7 - i % 8);
        if value {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn flip_bit(&mut self, i: usize) {
        self.set_bit(i, !self.bit(i));
    }

    /// Population count.
    pub fn ones(&self) -> u32 {
        self.bytes.iter().map(|b| b.count_ones()).sum()
    }

    /// Hamming distance, computed 64 bits at a time.
    pub fn hamming(&self, other: &BinaryCode) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::invalid_argument(format!(
                "cannot compare {}-bit and {}-bit codes",
                self.len, other.len
            )));
        }
        let mut a = self.bytes.chunks_exact(8);
        let mut b = other.bytes.chunks_exact(8);
        let mut dist = 0;
        for (wa, wb) in (&mut a).zip(&mut b) {
            let xa = u64::from_ne_bytes(wa.try_into().expect("8-byte chunk"));
            let xb = u64::from_ne_bytes(wb.try_into().expect("8-byte chunk"));
            dist += (xa ^ xb).count_ones();
        }
        for (ra, rb) in a.remainder().iter().zip(b.remainder()) {
            dist += (ra ^ rb).count_ones();
        }
        Ok(dist)
    }

    /// Lowercase hex of the packed bytes (two digits per byte).
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.bytes.len() * 2);
        for b in &self.bytes {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        let expect = len.div_ceil(8) * 2;
        if hex.len() != expect {
            return Err(Error::parse(format!(
                "hex code has {} digits, expected {expect} for {len} bits",
                hex.len()
            )));
        }
        let mut bytes = Vec::with_capacity(hex.len() / 2);
        for i in (0..hex.len()).step_by(2) {
            let pair = &hex[i..i + 2];
            let byte = u8::from_str_radix(pair, 16)
                .map_err(|_| Error::parse(format!("invalid hex byte {pair:?}")))?;
            bytes.push(byte);
        }
        BinaryCode::from_bytes(bytes, len)
    }

    /// The 16-bit codes used as hash keys, as a big-endian integer: code
    /// bit 0 is bit 15 of the key.
    pub fn as_u16_key(&self) -> Result<u16> {
        if self.len != 16 {
            return Err(Error::invalid_argument(format!(
                "hash keys must be 16-bit codes, got {} bits",
                self.len
            )));
        }
        Ok(u16::from_be_bytes([self.bytes[0], self.bytes[1]]))
    }

    pub fn from_u16_key(key: u16) -> Self {
        BinaryCode {
            bytes: key.to_be_bytes().to_vec(),
            len: 16,
        }
    }
}
