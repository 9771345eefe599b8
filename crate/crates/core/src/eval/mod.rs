//! Monte-Carlo estimators for the quantities that bound how the routed
//! method compares with the naive baseline.
//!
//! Every estimator takes a master seed and draws from labelled
//! [`crate::rng::substream`]s, so re-running with the same arguments
//! reproduces every count exactly. Tolerances are 3-sigma bands built from
//! the same samples.

mod accuracy;
mod capacity;
mod ecc;
mod lemma;
mod roc;
mod sample;

pub use accuracy::{
    eq1_decomposition, estimate_epsilon_r, evaluate_attack, run_accuracy_eval, AccuracyRecord,
    EpsilonEstimate, Eq1Record, EvalReport,
};
pub use capacity::{capacity_curve, CapacityRow, REDUNDANCY_CAP};
pub use ecc::{fer_sweep, FerPoint};
pub use lemma::{
    cluster_subset_accuracy, lemma1_check, lemma1_term, rank_scan, GroundTruthRank, Lemma1Record,
    Lemma1Term, SubsetPoint,
};
pub use roc::{roc_eval, roc_metrics, RocMetrics, RocRecord};
pub use sample::{sample_queries, SampledQuery};

/// Band width, in standard errors, for every statistical check.
pub const SIGMA_BAND: f64 = 3.0;

/// Minimum number of reliable decodes for an ε_r estimate not to be
/// flagged low-support.
pub const LOW_SUPPORT_MIN: u64 = 30;

/// Queries per blocked full-store scan.
pub(crate) const SCAN_CHUNK: usize = 512;

/// Default top-p values for the top-p bound.
pub const DEFAULT_P_LIST: [usize; 4] = [2, 5, 10, 20];

pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Standard error of a binomial proportion.
pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    libm::sqrt((p * (1.0 - p)).max(0.0) / n as f64)
}

/// Standard error of the mean of `values`.
pub(crate) fn mean_stderr(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    libm::sqrt(var / n as f64)
}
