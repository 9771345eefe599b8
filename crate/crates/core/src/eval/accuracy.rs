use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    binomial_stderr, mean_stderr, ratio, sample_queries, SampledQuery, LOW_SUPPORT_MIN, SCAN_CHUNK,
    SIGMA_BAND,
};
use crate::channel::{flip_bits, AttackConfig};
use crate::ecc::llr_from_key;
use crate::pipeline::{naive_result, route, routed_result, QueryConfig, QueryResult};
use crate::rng::substream;
use crate::store::{Match, Scope, Store};
use crate::{Error, Result};

/// Empirical `P(decoded != true cluster | flagged reliable)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub trials: u64,
    pub reliable: u64,
    pub errors: u64,
    /// `errors / reliable`, or 0 when nothing was flagged reliable.
    pub value: f64,
    pub stderr: f64,
    /// Fewer than [`LOW_SUPPORT_MIN`] reliable decodes.
    pub low_support: bool,
}

impl EpsilonEstimate {
    pub fn from_counts(trials: u64, reliable: u64, errors: u64) -> Self {
        let value = ratio(errors, reliable);
        Self {
            trials,
            reliable,
            errors,
            value,
            stderr: binomial_stderr(value, reliable),
            low_support: reliable < LOW_SUPPORT_MIN,
        }
    }
}

/// Terms of the accuracy-difference decomposition, counted on one paired
/// sample of in-dataset queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eq1Record {
    pub n_queries: u64,
    /// `P(routed correct, naive wrong, reliable, cluster right)`.
    pub gain_term: f64,
    /// `P(cluster wrong, reliable)`.
    pub loss_term: f64,
    /// `acc_drew - acc_naive`.
    pub accuracy_diff: f64,
    /// Standard error of the per-query `diff - gain + loss`.
    pub band_stderr: f64,
    /// `accuracy_diff >= gain - loss - 3 se`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub attack: AttackConfig,
    pub seed: u64,
    pub n_queries: u64,
    pub drew_correct: u64,
    pub naive_correct: u64,
    pub acc_drew: f64,
    pub acc_naive: f64,
    /// Standard error of the paired per-query difference.
    pub diff_stderr: f64,
    pub reliable_count: u64,
    pub p_reliable: f64,
    pub p_correct_cluster_given_reliable: f64,
    pub epsilon_r: EpsilonEstimate,
    pub eq1: Eq1Record,
    /// `acc_drew >= acc_naive - ε_r - 3 se`.
    pub never_worse: bool,
    /// Unreliable queries where the routed and naive results differ (must be 0).
    pub unreliable_mismatches: u64,
    pub empty_cluster_fallbacks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub n_queries: u64,
    pub config: QueryConfig,
    pub records: Vec<AccuracyRecord>,
}

fn is_correct(result: &QueryResult, truth: Option<u64>) -> bool {
    result.matched_id == truth
}

/// One paired run: every query goes through the routed and the naive
/// method; the unreliable branch reuses the naive full-store match.
pub fn evaluate_attack(
    store: &Store,
    stream: u64,
    attack: &AttackConfig,
    holdout: &[Vec<f32>],
    cfg: &QueryConfig,
    n_queries: usize,
    seed: u64,
) -> Result<AccuracyRecord> {
    if n_queries == 0 {
        return Err(Error::Argument("n_queries must be positive".into()));
    }
    cfg.validate()?;
    let partition = store.require_partition()?;
    let samples = sample_queries(store, attack, holdout, n_queries, seed, stream)?;

    let mut full: Vec<Option<Match>> = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(SCAN_CHUNK) {
        let qs: Vec<&[f32]> = chunk
            .iter()
            .map(|s| s.query.observed_embedding.as_slice())
            .collect();
        full.extend(store.best_full_batch(&qs)?);
    }

    let n = samples.len() as u64;
    let (mut drew_correct, mut naive_correct, mut reliable, mut reliable_wrong) =
        (0u64, 0u64, 0u64, 0u64);
    let (mut gain, mut mismatches, mut fallbacks) = (0u64, 0u64, 0u64);
    let mut diffs: Vec<f64> = Vec::with_capacity(samples.len());
    let mut slack: Vec<f64> = Vec::with_capacity(samples.len());

    for (SampledQuery { source, query }, &best_full) in samples.iter().zip(&full) {
        let routing = route(store, &query.observed_key, cfg)?;
        let best = match routing.scope {
            Scope::Full => best_full,
            scope => store.best_match(scope, &query.observed_embedding)?,
        };
        let drew = routed_result(store, &routing, best, cfg)?;
        let naive = naive_result(store, best_full, cfg);
        fallbacks += u64::from(routing.empty_cluster_fallback);
        if !routing.routed()
            && (drew.matched_id, drew.similarity) != (naive.matched_id, naive.similarity)
        {
            mismatches += 1;
        }

        let truth = query.ground_truth_id;
        let d_ok = is_correct(&drew, truth);
        let n_ok = is_correct(&naive, truth);
        drew_correct += u64::from(d_ok);
        naive_correct += u64::from(n_ok);
        let diff = f64::from(u8::from(d_ok)) - f64::from(u8::from(n_ok));
        diffs.push(diff);

        let (mut g, mut l) = (0.0, 0.0);
        if routing.routed() && truth.is_some() {
            reliable += 1;
            let right_cluster =
                routing.outcome.code.index() == u64::from(partition.cluster_of(*source));
            if right_cluster {
                if d_ok && !n_ok {
                    gain += 1;
                    g = 1.0;
                }
            } else {
                reliable_wrong += 1;
                l = 1.0;
            }
        }
        slack.push(diff - g + l);
    }

    let acc_drew = ratio(drew_correct, n);
    let acc_naive = ratio(naive_correct, n);
    let diff_stderr = mean_stderr(diffs.iter().copied());
    let epsilon_r = EpsilonEstimate::from_counts(n, reliable, reliable_wrong);
    let gain_term = ratio(gain, n);
    let loss_term = ratio(reliable_wrong, n);
    let accuracy_diff = acc_drew - acc_naive;
    let band_stderr = mean_stderr(slack.iter().copied());
    let slack_total =
        drew_correct as i64 - naive_correct as i64 - gain as i64 + reliable_wrong as i64;
    let eq1 = Eq1Record {
        n_queries: n,
        gain_term,
        loss_term,
        accuracy_diff,
        band_stderr,
        // Decided on the integer slack so that exact equality cannot fail
        // through rounding of the separately computed ratios.
        holds: slack_total as f64 >= -SIGMA_BAND * band_stderr * n as f64,
    };
    Ok(AccuracyRecord {
        attack: attack.clone(),
        seed,
        n_queries: n,
        drew_correct,
        naive_correct,
        acc_drew,
        acc_naive,
        diff_stderr,
        reliable_count: reliable,
        p_reliable: ratio(reliable, n),
        p_correct_cluster_given_reliable: ratio(reliable - reliable_wrong, reliable),
        epsilon_r,
        eq1,
        never_worse: acc_drew >= acc_naive - epsilon_r.value - SIGMA_BAND * diff_stderr,
        unreliable_mismatches: mismatches,
        empty_cluster_fallbacks: fallbacks,
    })
}

/// Runs [`evaluate_attack`] for each attack in order, attack `i` on stream `i`.
pub fn run_accuracy_eval(
    store: &Store,
    suite: &[AttackConfig],
    holdout: &[Vec<f32>],
    cfg: &QueryConfig,
    n_queries: usize,
    seed: u64,
) -> Result<EvalReport> {
    let records = suite
        .iter()
        .enumerate()
        .map(|(i, a)| evaluate_attack(store, i as u64, a, holdout, cfg, n_queries, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        seed,
        n_queries: n_queries as u64,
        config: *cfg,
        records,
    })
}

/// The decomposition alone for one attack.
pub fn eq1_decomposition(
    store: &Store,
    attack: &AttackConfig,
    cfg: &QueryConfig,
    n_queries: usize,
    seed: u64,
) -> Result<Eq1Record> {
    if attack.out_of_dataset {
        return Err(Error::NeedsGroundTruth(attack.name.clone()));
    }
    Ok(evaluate_attack(store, 0, attack, &[], cfg, n_queries, seed)?.eq1)
}

/// Decoder false-positive rate for one attack's flip rate. Only the key
/// path is simulated.
pub fn estimate_epsilon_r(
    store: &Store,
    attack: &AttackConfig,
    cfg: &QueryConfig,
    n_trials: u64,
    seed: u64,
) -> Result<EpsilonEstimate> {
    if n_trials == 0 {
        return Err(Error::Argument("n_trials must be positive".into()));
    }
    if attack.out_of_dataset {
        return Err(Error::NeedsGroundTruth(attack.name.clone()));
    }
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    let partition = store.require_partition()?;
    let spec = partition.spec();
    let decoder = cfg.decoder();
    let mut pick = substream(seed, "eval/epsilon/pick", 0);
    let mut noise = substream(seed, "eval/epsilon/key", 0);
    let (mut reliable, mut errors) = (0u64, 0u64);
    for _ in 0..n_trials {
        let cluster = partition.cluster_of(pick.gen_range(0..store.len()));
        let observed = flip_bits(partition.key(cluster), attack.p_a, &mut noise);
        let out = decoder.decode(
            spec,
            &llr_from_key(spec, &observed, spec.design_p())?,
            cfg.reliability_threshold,
        )?;
        if out.reliable {
            reliable += 1;
            errors += u64::from(out.code.index() != u64::from(cluster));
        }
    }
    Ok(EpsilonEstimate::from_counts(n_trials, reliable, errors))
}
