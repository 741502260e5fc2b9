//! Channel-optimized distributed multiple-description quantization.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asym;
pub mod bound;
pub mod channel;
pub mod cli;
pub mod codec;
pub mod error;
pub mod prob;
pub mod quantizer;
pub mod selection;
pub mod simulator;
pub mod symmetric;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod test_support;
