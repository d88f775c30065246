//! Learned binary codes for grayscale image retrieval: de-noising
//! autoencoder hashing, Radon barcodes, Hamming-distance search, and the
//! hierarchical IRMA error metric.

pub mod code;
pub mod dataset;
pub mod error;
pub mod hasher;
pub mod index;
pub mod irma;
pub mod matrix;
pub mod nn;
pub mod radon;
pub mod rng;
pub mod stats;
pub mod storage;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::Rng;
