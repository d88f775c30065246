//! Deterministic pseudo-random number generation.
//!
//! Trained weights, synthetic datasets, and retrieval answers must be exactly
//! reproducible from a recorded seed, on any platform. The generator is
//! therefore a fixed algorithm (SplitMix64) implemented here instead of a
//! library RNG whose stream could change between versions.

/// SplitMix64 generator: a 64-bit counter advanced by a fixed increment,
/// hashed to produce each output.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Derives an independent generator for a labelled sub-stream, so that
    /// draws in one stream never shift another (e.g. per-class, per-image).
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut base = Rng::new(seed);
        let a = base.next_u64();
        let mut mixed = Rng::new(a ^ stream.wrapping_mul(GOLDEN_GAMMA));
        let s = mixed.next_u64();
        Rng::new(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1) with the full 53-bit mantissa.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). Rejection sampling keeps the draw unbiased.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0) is undefined");
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle using this generator's stream.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}
