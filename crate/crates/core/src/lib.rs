//! Transformer-based joint source-channel coding for short text over binary
//! erasure, symmetric and deletion channels, with a classical Huffman plus
//! convolutional-code baseline for comparison.

pub mod autodiff;
pub mod baseline;
pub mod channels;
pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tensor;
pub mod tokenizer;
pub mod train;

pub use error::{Error, Result};
