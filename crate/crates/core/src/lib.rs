//! Watermark-routed exact retrieval.
//!
//! Every dataset entry is assigned to one of `2^k` random clusters. The
//! cluster index is expanded by a shortened polar code into an `n`-bit key
//! that the watermark carries. At query time the (noisy) key read back from
//! the content is decoded with successive cancellation; if the decode is
//! flagged reliable, exact dot-product search runs only inside the decoded
//! cluster, otherwise over the whole store.
//!
//! The crate is `no_std` (with `alloc`) and free of IO. File handling and
//! the command-line tool live in the `drew` crate.
//!
//! Module map:
//!
//! - [`ecc`]: polar code construction, encoding, SC decoding with a
//!   reliability flag, and binary-entropy capacity helpers.
//! - [`channel`]: the bit-flip + embedding-drift attack model.
//! - [`store`]: unit-norm embedding store, random partition, exact search.
//! - [`pipeline`]: preprocessing, the routed query and the naive baseline.
//! - [`eval`]: Monte-Carlo estimators for accuracy, decoder false positives,
//!   the improvement decomposition, the top-p bound and ROC metrics.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;

pub mod channel;
pub mod ecc;
mod error;
pub mod eval;
pub mod pipeline;
pub mod rng;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
