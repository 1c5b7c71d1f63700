// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod disc;
pub mod emi;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod recon;
pub mod synthetic;

pub use error::{Error, Result};
