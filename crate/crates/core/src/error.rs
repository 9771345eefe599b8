use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid code parameters: {0}")]
    InvalidCode(String),
    #[error("probability {value} outside {range}")]
    Probability { value: f64, range: &'static str },
    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("invalid bit value {0} (expected 0 or 1)")]
    BitValue(u8),
    #[error("non-finite LLR at position {0}")]
    NonFiniteLlr(usize),
    #[error("invalid threshold {0}")]
    Threshold(f64),
    #[error("dimension mismatch: store has d={expected}, vector has {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("vector for id {0} has zero or non-finite norm")]
    DegenerateVector(u64),
    #[error("vector is not unit norm (norm {0})")]
    NotUnitNorm(f64),
    #[error("duplicate id {0}")]
    DuplicateId(u64),
    #[error("unknown id {0}")]
    UnknownId(u64),
    #[error("cluster bit count {0} outside 1..=16")]
    ClusterBits(u32),
    #[error("code spec has k={spec}, partition requested k={requested}")]
    SpecMismatch { spec: usize, requested: u32 },
    #[error("cluster {cluster} out of range for k={k}")]
    ClusterRange { cluster: u64, k: u32 },
    #[error("entry {0} stored key does not match its cluster code")]
    KeyMismatch(u64),
    #[error("store has no cluster partition; run preprocessing first")]
    Unpartitioned,
    #[error("store is empty")]
    EmptyStore,
    #[error("noise produced a degenerate embedding twice in a row")]
    DegenerateNoise,
    #[error("out-of-dataset attack requires a held-out embedding pool")]
    MissingHoldout,
    #[error("attack `{0}` has no ground truth; this estimator needs in-dataset queries")]
    NeedsGroundTruth(String),
    #[error("invalid attack `{name}`: {reason}")]
    Attack { name: String, reason: String },
    #[error("invalid argument: {0}")]
    Argument(String),
}
