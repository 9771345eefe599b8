//! Error control for cluster keys: a shortened polar code with a
//! successive-cancellation decoder and an LLR-magnitude reliability flag.
//!
//! Codewords are `x = u · F^{⊗m}` in natural (non bit-reversed) order with
//! `F = [[1, 0], [1, 1]]`. The code is shortened by freezing the last
//! `block_len - n` input bits; in natural order those are exactly the last
//! `block_len - n` codeword bits, which are then always zero, never
//! transmitted, and fed to the decoder as known zeros.

mod bits;
mod capacity;
mod code;
mod sc;

pub use bits::{ClusterCode, WatermarkKey};
pub use capacity::{binary_entropy, capacity_rate, flip_rate_limit};
pub use code::{construct_code, encode, llr_from_key, polar_transform, PolarCodeSpec};
pub use sc::{decode, CheckNode, DecodeOutcome, ReliabilityMode, ScDecoder};

/// LLR assigned to shortened (known-zero) positions.
pub const KNOWN_BIT_LLR: f64 = 1e6;

/// Default design crossover probability used for frozen-set construction
/// and for LLR scaling at query time.
pub const DEFAULT_DESIGN_P: f64 = 0.1;

/// Default reliability threshold on the decision LLR magnitude.
pub const DEFAULT_RELIABILITY_THRESHOLD: f64 = 0.5;

/// Default information-bit count (1024 clusters).
pub const DEFAULT_K: usize = 10;

/// Default transmitted key length.
pub const DEFAULT_N: usize = 100;
