use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{sample_queries, SCAN_CHUNK};
use crate::channel::AttackConfig;
use crate::pipeline::{route, QueryConfig};
use crate::store::{Scope, Store};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocMetrics {
    pub auroc: f64,
    /// Largest TPR over operating points with FPR <= 0.1.
    pub tpr_at_fpr_0_1: f64,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub curve: Vec<(f64, f64)>,
}

/// ROC of "score >= t" separating `positives` from `negatives`, with the
/// threshold swept over every distinct score. Tied scores move the curve
/// diagonally, so constant scores give AUROC 0.5.
pub fn roc_metrics(positives: &[f64], negatives: &[f64]) -> Result<RocMetrics> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Argument(
            "ROC needs at least one positive and one negative".into(),
        ));
    }
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    let mut curve = alloc::vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let s = all[i].0;
        while i < all.len() && all[i].0.total_cmp(&s).is_eq() {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push((fp as f64 / nn, tp as f64 / np));
    }
    let auroc = curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    let tpr_at_fpr_0_1 = curve
        .iter()
        .filter(|(f, _)| *f <= 0.1)
        .map(|&(_, t)| t)
        .fold(0.0, f64::max);
    Ok(RocMetrics {
        auroc,
        tpr_at_fpr_0_1,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocRecord {
    pub attack: AttackConfig,
    pub seed: u64,
    pub n_in: u64,
    pub n_out: u64,
    pub drew: RocMetrics,
    pub naive: RocMetrics,
    /// In-dataset queries whose routed score is below the naive score.
    /// Only these can lower the routed AUROC, each by at most `1 / n_in`,
    /// so `drew.auroc >= naive.auroc - lowered_in / n_in` always holds.
    pub lowered_in: u64,
}

/// In-dataset queries (positives) against out-of-dataset queries
/// (negatives) under the same attack strength, scored by the best
/// similarity each method returns.
pub fn roc_eval(
    store: &Store,
    attack: &AttackConfig,
    holdout: &[Vec<f32>],
    cfg: &QueryConfig,
    n_in: usize,
    n_out: usize,
    seed: u64,
) -> Result<RocRecord> {
    if n_in == 0 || n_out == 0 {
        return Err(Error::Argument("n_in and n_out must be at least 1".into()));
    }
    cfg.validate()?;
    let inside = AttackConfig {
        out_of_dataset: false,
        ..attack.clone()
    };
    let outside = AttackConfig {
        out_of_dataset: true,
        ..attack.clone()
    };
    let mut scores = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
    let mut lowered_in = 0u64;
    for (class, (a, count, stream)) in [(&inside, n_in, 0u64), (&outside, n_out, 1u64)]
        .into_iter()
        .enumerate()
    {
        let samples = sample_queries(store, a, holdout, count, seed, stream)?;
        for chunk in samples.chunks(SCAN_CHUNK) {
            let qs: Vec<&[f32]> = chunk
                .iter()
                .map(|s| s.query.observed_embedding.as_slice())
                .collect();
            for (s, full) in chunk.iter().zip(store.best_full_batch(&qs)?) {
                let routing = route(store, &s.query.observed_key, cfg)?;
                let routed = match routing.scope {
                    Scope::Full => full,
                    scope => store.best_match(scope, &s.query.observed_embedding)?,
                };
                let score =
                    |m: Option<crate::store::Match>| m.map_or(f64::NEG_INFINITY, |m| m.similarity);
                lowered_in += u64::from(class == 0 && score(routed) < score(full));
                scores[0][class].push(score(routed));
                scores[1][class].push(score(full));
            }
        }
    }
    Ok(RocRecord {
        attack: attack.clone(),
        seed,
        n_in: n_in as u64,
        n_out: n_out as u64,
        drew: roc_metrics(&scores[0][0], &scores[0][1])?,
        naive: roc_metrics(&scores[1][0], &scores[1][1])?,
        lowered_in,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_and_constant() {
        let m = roc_metrics(&[0.9, 0.8, 0.95], &[0.1, 0.2]).unwrap();
        assert_eq!(m.auroc, 1.0);
        assert_eq!(m.tpr_at_fpr_0_1, 1.0);
        let c = roc_metrics(&[0.5; 4], &[0.5; 7]).unwrap();
        assert_eq!(c.auroc, 0.5);
        assert_eq!(c.tpr_at_fpr_0_1, 0.0);
        let inv = roc_metrics(&[0.1], &[0.9]).unwrap();
        assert_eq!(inv.auroc, 0.0);
        assert!(roc_metrics(&[], &[1.0]).is_err());
    }

    #[test]
    fn auroc_equals_pair_count() {
        // Mann-Whitney: P(pos > neg) + 0.5 P(tie)
        let pos = [0.3, 0.5, 0.5, 0.9];
        let neg = [0.1, 0.5, 0.6];
        let mut wins = 0.0;
        for p in pos {
            for n in neg {
                wins += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        let m = roc_metrics(&pos, &neg).unwrap();
        assert!((m.auroc - wins / 12.0).abs() < 1e-12);
    }
}
