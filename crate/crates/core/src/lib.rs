//! Wideband massive-MIMO channel prediction lab.
//!
//! Synthetic sum-of-paths channels, pilot-based LS estimation, the
//! subcarrier/antenna domain regrouping, sliding-window datasets, a
//! from-scratch MLP trained with ADAM, and the SL / JL / JLDT prediction
//! pipelines with NMSE evaluation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod correlation;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod nn;
pub mod pipeline;
pub mod pilot;
pub mod rng;
pub mod tensor;
pub mod trace;

pub use error::{Error, Result};
pub use tensor::{ChannelTensor, Domain, Provenance};
