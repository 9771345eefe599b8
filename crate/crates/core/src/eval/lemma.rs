use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{binomial_stderr, mean_stderr, ratio, sample_queries, SCAN_CHUNK, SIGMA_BAND};
use crate::channel::AttackConfig;
use crate::store::{dot, Match, Store};
use crate::{Error, Result};

/// Where a query's ground-truth entry lands in the full-store ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruthRank {
    /// Entries ranked strictly ahead of the ground truth (0 = top-1 hit).
    pub ahead: u64,
    /// Longest common label prefix (in cluster bits) between the ground
    /// truth's cluster and any entry ranked ahead of it; `None` if nothing
    /// is ahead. The ground truth wins a scope of `j` prefix bits iff this
    /// is below `j`.
    pub max_shared_prefix: Option<u32>,
}

fn shared_prefix(a: u32, b: u32, k: u32) -> u32 {
    if a == b {
        k
    } else {
        (a ^ b).leading_zeros() - (32 - k)
    }
}

/// Full-store rank scan of each sampled in-dataset query against its
/// ground-truth entry.
pub fn rank_scan(
    store: &Store,
    attack: &AttackConfig,
    n_queries: usize,
    seed: u64,
) -> Result<Vec<GroundTruthRank>> {
    if attack.out_of_dataset {
        return Err(Error::NeedsGroundTruth(attack.name.clone()));
    }
    if n_queries == 0 {
        return Err(Error::Argument("n_queries must be positive".into()));
    }
    let partition = store.require_partition()?;
    let k = partition.k();
    let samples = sample_queries(store, attack, &[], n_queries, seed, 0)?;
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(SCAN_CHUNK) {
        let qs: Vec<&[f32]> = chunk
            .iter()
            .map(|s| s.query.observed_embedding.as_slice())
            .collect();
        let truth: Vec<(Match, u32)> = chunk
            .iter()
            .map(|s| {
                let m = Match {
                    id: store.id(s.source),
                    similarity: f64::from(dot(
                        &s.query.observed_embedding,
                        store.embedding(s.source),
                    )),
                };
                (m, partition.cluster_of(s.source))
            })
            .collect();
        let mut ranks: Vec<GroundTruthRank> =
            alloc::vec![GroundTruthRank { ahead: 0, max_shared_prefix: None }; chunk.len()];
        let ids = store.ids();
        let clusters = partition.clusters();
        store.scan_batch(&qs, |qi, i, s| {
            let (gt, gt_cluster) = truth[qi];
            let m = Match {
                id: ids[i],
                similarity: f64::from(s),
            };
            if m.beats(&gt) {
                let r = &mut ranks[qi];
                r.ahead += 1;
                let pre = shared_prefix(clusters[i], gt_cluster, k);
                r.max_shared_prefix = Some(r.max_shared_prefix.map_or(pre, |x| x.max(pre)));
            }
        })?;
        out.extend(ranks);
    }
    Ok(out)
}

/// `(alpha_p - alpha) (1 - 2^-k)^(p-1)`.
pub fn lemma1_term(alpha: f64, alpha_p: f64, k: u32, p: usize) -> f64 {
    let keep = 1.0 - libm::pow(2.0, -f64::from(k));
    (alpha_p - alpha) * libm::pow(keep, (p - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Term {
    pub p: usize,
    pub alpha_p: f64,
    pub rhs: f64,
    /// Standard error of the paired per-query `lhs - rhs` indicator.
    pub stderr: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Record {
    pub attack: AttackConfig,
    pub seed: u64,
    pub n_queries: u64,
    pub k: u32,
    /// Top-1 accuracy over the full store.
    pub alpha: f64,
    pub alpha_p: BTreeMap<usize, f64>,
    /// `P(cluster-scoped argmax = x_i, full argmax != x_i)` under oracle routing.
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// `max_p rhs`.
    pub bound: f64,
    pub terms: Vec<Lemma1Term>,
    /// Every term holds within the band.
    pub holds: bool,
}

/// Checks the top-p lower bound with the scope forced to the ground-truth
/// cluster.
pub fn lemma1_check(
    store: &Store,
    attack: &AttackConfig,
    p_list: &[usize],
    n_queries: usize,
    seed: u64,
) -> Result<Lemma1Record> {
    if p_list.is_empty() || p_list.iter().any(|&p| !(2..=50).contains(&p)) {
        return Err(Error::Argument(
            "p_list must be a nonempty subset of 2..=50".into(),
        ));
    }
    let k = store.require_partition()?.k();
    let ranks = rank_scan(store, attack, n_queries, seed)?;
    let n = ranks.len() as u64;
    let top1: Vec<f64> = ranks
        .iter()
        .map(|r| f64::from(u8::from(r.ahead == 0)))
        .collect();
    let lhs_ind: Vec<f64> = ranks
        .iter()
        .map(|r| {
            f64::from(u8::from(
                r.ahead > 0 && r.max_shared_prefix.is_some_and(|x| x < k),
            ))
        })
        .collect();
    let alpha = top1.iter().sum::<f64>() / n as f64;
    let lhs = lhs_ind.iter().sum::<f64>() / n as f64;

    let mut alpha_p = BTreeMap::new();
    let mut terms = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let a_p = ratio(
            ranks.iter().filter(|r| r.ahead < p as u64).count() as u64,
            n,
        );
        alpha_p.insert(p, a_p);
        let rhs = lemma1_term(alpha, a_p, k, p);
        let w = lemma1_term(0.0, 1.0, k, p);
        let paired = ranks.iter().zip(&lhs_ind).zip(&top1).map(|((r, &l), &t)| {
            let in_top_p = f64::from(u8::from(r.ahead < p as u64));
            l - w * (in_top_p - t)
        });
        let stderr = mean_stderr(paired);
        terms.push(Lemma1Term {
            p,
            alpha_p: a_p,
            rhs,
            stderr,
            holds: lhs >= rhs - SIGMA_BAND * stderr,
        });
    }
    let bound = terms
        .iter()
        .map(|t| t.rhs)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Lemma1Record {
        attack: attack.clone(),
        seed,
        n_queries: n,
        k,
        alpha,
        alpha_p,
        lhs,
        lhs_stderr: binomial_stderr(lhs, n),
        bound,
        holds: terms.iter().all(|t| t.holds),
        terms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetPoint {
    pub k: u32,
    pub accuracy: f64,
    pub stderr: f64,
}

/// Oracle-routed accuracy when the store is split into `2^j` clusters for
/// each `j` in `k_grid`. The split for `j` groups stored labels by their
/// top `j` bits, so scopes are nested and `j = 0` is the full store.
pub fn cluster_subset_accuracy(
    store: &Store,
    attack: &AttackConfig,
    k_grid: &[u32],
    n_queries: usize,
    seed: u64,
) -> Result<Vec<SubsetPoint>> {
    let k = store.require_partition()?.k();
    if let Some(&bad) = k_grid.iter().find(|&&j| j > k) {
        return Err(Error::Argument(alloc::format!(
            "k={bad} exceeds the store's {k} cluster bits"
        )));
    }
    let ranks = rank_scan(store, attack, n_queries, seed)?;
    let n = ranks.len() as u64;
    Ok(k_grid
        .iter()
        .map(|&j| {
            let hits = ranks
                .iter()
                .filter(|r| r.max_shared_prefix.is_none_or(|x| x < j))
                .count() as u64;
            let accuracy = ratio(hits, n);
            SubsetPoint {
                k: j,
                accuracy,
                stderr: binomial_stderr(accuracy, n),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_lengths() {
        assert_eq!(shared_prefix(0b1010, 0b1010, 4), 4);
        assert_eq!(shared_prefix(0b1010, 0b0010, 4), 0);
        assert_eq!(shared_prefix(0b1010, 0b1011, 4), 3);
    }

    #[test]
    fn spot_term() {
        // (0.9 - 0.8) * 1023/1024
        let t = lemma1_term(0.8, 0.9, 10, 2);
        assert!((t - 0.099_902_343_75).abs() < 1e-12);
    }
}
