//! Preprocessing and the two retrieval methods: the routed query and the
//! naive full-store baseline.

use serde::{Deserialize, Serialize};

use crate::channel::Query;
use crate::ecc::{
    llr_from_key, CheckNode, ClusterCode, DecodeOutcome, PolarCodeSpec, ReliabilityMode, ScDecoder,
    WatermarkKey,
};
use crate::store::{Match, Scope, Store};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryConfig {
    pub reliability_threshold: f64,
    /// Similarity below which a query has no match.
    pub tau_r: f64,
    pub reliability_mode: ReliabilityMode,
    pub check_node: CheckNode,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            reliability_threshold: crate::ecc::DEFAULT_RELIABILITY_THRESHOLD,
            tau_r: -1.0,
            reliability_mode: ReliabilityMode::LastBit,
            check_node: CheckNode::Exact,
        }
    }
}

impl QueryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.tau_r) {
            return Err(Error::Argument(alloc::format!(
                "tau_r={} outside [-1, 1]",
                self.tau_r
            )));
        }
        if !(self.reliability_threshold >= 0.0 && self.reliability_threshold.is_finite()) {
            return Err(Error::Threshold(self.reliability_threshold));
        }
        Ok(())
    }

    pub fn decoder(&self) -> ScDecoder {
        ScDecoder::new(self.check_node, self.reliability_mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    /// `None` is the no-match answer.
    pub matched_id: Option<u64>,
    /// Best similarity in scope; `None` only when the scope was empty.
    pub similarity: Option<f64>,
    /// Absent for the naive method.
    pub decoded_code: Option<ClusterCode>,
    /// Whether the search was restricted to the decoded cluster. Absent for
    /// the naive method.
    pub reliable: Option<bool>,
    pub scope_size: usize,
    /// The decoder flagged the code reliable but its cluster had no entries.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub empty_cluster_fallback: bool,
}

/// Decoder verdict for one observed key and the scope it selects.
#[derive(Debug, Clone, PartialEq)]
pub struct Routing {
    pub outcome: DecodeOutcome,
    pub scope: Scope,
    pub empty_cluster_fallback: bool,
}

impl Routing {
    pub fn routed(&self) -> bool {
        matches!(self.scope, Scope::Cluster(_))
    }
}

/// Assigns clusters and attaches the encoded key to every entry. Watermark
/// injection is represented by the key carried on the entry.
pub fn preprocess(raw: &Store, k: u32, seed: u64, spec: &PolarCodeSpec) -> Result<Store> {
    raw.assign_clusters(k, seed, spec)
}

/// Decodes an observed key with LLRs scaled for the code's design crossover
/// (the attack's true flip rate is unknown to the decoder).
pub fn route(store: &Store, key: &WatermarkKey, cfg: &QueryConfig) -> Result<Routing> {
    let partition = store.require_partition()?;
    let spec = partition.spec();
    let llrs = llr_from_key(spec, key, spec.design_p())?;
    let outcome = cfg
        .decoder()
        .decode(spec, &llrs, cfg.reliability_threshold)?;
    let cluster = outcome.code.index() as u32;
    let (scope, empty_cluster_fallback) = if !outcome.reliable {
        (Scope::Full, false)
    } else if partition.cluster_size(cluster) == 0 {
        (Scope::Full, true)
    } else {
        (Scope::Cluster(cluster), false)
    };
    Ok(Routing {
        outcome,
        scope,
        empty_cluster_fallback,
    })
}

fn apply_threshold(best: Option<Match>, tau_r: f64) -> (Option<u64>, Option<f64>) {
    match best {
        Some(m) if m.similarity >= tau_r => (Some(m.id), Some(m.similarity)),
        Some(m) => (None, Some(m.similarity)),
        None => (None, None),
    }
}

/// Assembles the routed result from a routing decision and the best match
/// in its scope.
pub fn routed_result(
    store: &Store,
    routing: &Routing,
    best: Option<Match>,
    cfg: &QueryConfig,
) -> Result<QueryResult> {
    let (matched_id, similarity) = apply_threshold(best, cfg.tau_r);
    Ok(QueryResult {
        matched_id,
        similarity,
        decoded_code: Some(routing.outcome.code.clone()),
        reliable: Some(routing.routed()),
        scope_size: store.scope_size(routing.scope)?,
        empty_cluster_fallback: routing.empty_cluster_fallback,
    })
}

/// Assembles the naive result from a full-store best match.
pub fn naive_result(store: &Store, best: Option<Match>, cfg: &QueryConfig) -> QueryResult {
    let (matched_id, similarity) = apply_threshold(best, cfg.tau_r);
    QueryResult {
        matched_id,
        similarity,
        decoded_code: None,
        reliable: None,
        scope_size: store.len(),
        empty_cluster_fallback: false,
    }
}

fn check_query(store: &Store, q: &Query) -> Result<()> {
    if q.observed_embedding.len() != store.dim() {
        return Err(Error::Dimension {
            expected: store.dim(),
            actual: q.observed_embedding.len(),
        });
    }
    Ok(())
}

/// Decode the key, search the decoded cluster if reliable (else the whole
/// store), and apply the similarity threshold.
pub fn drew_query(store: &Store, q: &Query, cfg: &QueryConfig) -> Result<QueryResult> {
    cfg.validate()?;
    check_query(store, q)?;
    let routing = route(store, &q.observed_key, cfg)?;
    let best = store.best_match(routing.scope, &q.observed_embedding)?;
    routed_result(store, &routing, best, cfg)
}

/// Full-store argmax with the same threshold rule.
pub fn naive_query(store: &Store, q: &Query, cfg: &QueryConfig) -> Result<QueryResult> {
    cfg.validate()?;
    check_query(store, q)?;
    let best = store.best_match(Scope::Full, &q.observed_embedding)?;
    Ok(naive_result(store, best, cfg))
}
