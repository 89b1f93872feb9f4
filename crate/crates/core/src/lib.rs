// `!(x > 0.0)` is used on purpose so that NaN fails validation, and the
// dense kernels index matrices by position.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algorithms;
pub mod cli;
pub mod digraph;
pub mod error;
pub mod exec;
pub mod harness;
pub mod objective;
pub mod schedule;
pub mod spectral;
pub mod weights;

pub use digraph::Digraph;
pub use error::{Error, Result};
pub use spectral::{RateFit, SpectralVerdict};
pub use weights::WeightSystem;
