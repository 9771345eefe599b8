//! End-to-end evaluation: every requested section for every attack, with
//! attacks evaluated in parallel and merged back in suite order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use drew_core::channel::AttackConfig;
use drew_core::eval::{
    binomial_stderr, capacity_curve, cluster_subset_accuracy, estimate_epsilon_r, evaluate_attack,
    fer_sweep, lemma1_check, roc_eval, AccuracyRecord, CapacityRow, EpsilonEstimate, FerPoint,
    Lemma1Record, RocRecord, SubsetPoint, SIGMA_BAND,
};
use drew_core::pipeline::QueryConfig;
use drew_core::store::Store;
use drew_core::synth::holdout_pool;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::EvalParams;
use crate::golden::{compare, epsilon_sweep, GoldenEpsilon, GoldenVerdict};
use crate::report::{Check, CurveRow};
use crate::{DrewError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Section {
    Accuracy,
    Lemma,
    Subset,
    Roc,
    Epsilon,
    CapacityCurve,
    EccBench,
}

impl Section {
    pub const ALL: [Section; 7] = [
        Section::Accuracy,
        Section::Lemma,
        Section::Subset,
        Section::Roc,
        Section::Epsilon,
        Section::CapacityCurve,
        Section::EccBench,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Section::Accuracy => "accuracy",
            Section::Lemma => "lemma",
            Section::Subset => "subset",
            Section::Roc => "roc",
            Section::Epsilon => "epsilon",
            Section::CapacityCurve => "capacity-curve",
            Section::EccBench => "ecc-bench",
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Section {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Section::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown section `{s}` (expected one of {})",
                    Section::ALL.map(Section::name).join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSummary {
    #[serde(rename = "N")]
    pub len: usize,
    pub d: usize,
    pub k: u32,
    pub n: usize,
    pub design_p: f64,
    pub partition_seed: u64,
    pub empty_clusters: usize,
    pub max_cluster_size: usize,
    /// Cluster size to number of clusters with that size.
    pub cluster_size_histogram: BTreeMap<usize, usize>,
}

impl StoreSummary {
    pub fn of(store: &Store) -> Result<Self> {
        let p = store.require_partition()?;
        let sizes = p.cluster_sizes();
        let mut cluster_size_histogram = BTreeMap::new();
        for &s in &sizes {
            *cluster_size_histogram.entry(s).or_insert(0) += 1;
        }
        Ok(Self {
            len: store.len(),
            d: store.dim(),
            k: p.k(),
            n: p.spec().n(),
            design_p: p.spec().design_p(),
            partition_seed: p.seed(),
            empty_clusters: sizes.iter().filter(|&&s| s == 0).count(),
            max_cluster_size: sizes.iter().copied().max().unwrap_or(0),
            cluster_size_histogram,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: AttackConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma: Option<Lemma1Record>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<SubsetPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc: Option<RocRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoldenStatus {
    Checked,
    /// No usable golden file; the fresh sweep was written as a candidate.
    CalibrationRequired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSection {
    /// ε_r with no channel noise, which must be exactly 0.
    pub noiseless: EpsilonEstimate,
    pub sweep: GoldenEpsilon,
    pub golden_source: String,
    pub golden_status: GoldenStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub golden_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub seed: u64,
    pub store: StoreSummary,
    pub query: QueryConfig,
    pub params: EvalParams,
    pub sections: Vec<Section>,
    pub attacks: Vec<AttackReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<Vec<CapacityRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ecc: Option<Vec<FerPoint>>,
    pub checks: Vec<Check>,
}

impl FullReport {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn calibration_required(&self) -> bool {
        self.epsilon
            .as_ref()
            .is_some_and(|e| e.golden_status == GoldenStatus::CalibrationRequired)
    }
}

/// Where the reference ε_r values come from.
pub struct Golden {
    pub source: String,
    /// `None` when the named file does not exist.
    pub values: Option<GoldenEpsilon>,
}

pub struct EvalRequest<'a> {
    pub store: &'a Store,
    pub suite: &'a [AttackConfig],
    pub query: QueryConfig,
    pub params: &'a EvalParams,
    pub sections: &'a [Section],
    pub seed: u64,
    pub golden: Option<Golden>,
}

fn per_attack(
    req: &EvalRequest<'_>,
    stream: u64,
    attack: &AttackConfig,
    holdout: &[Vec<f32>],
) -> Result<AttackReport> {
    let (store, p, seed) = (req.store, req.params, req.seed);
    let wants = |s: Section| req.sections.contains(&s);
    let k = store.require_partition()?.k();
    let in_dataset = !attack.out_of_dataset;
    let accuracy = if wants(Section::Accuracy) {
        Some(evaluate_attack(
            store,
            stream,
            attack,
            holdout,
            &req.query,
            p.n_queries,
            seed,
        )?)
    } else {
        None
    };
    let lemma = if wants(Section::Lemma) && in_dataset {
        Some(lemma1_check(
            store,
            attack,
            &p.p_list,
            p.lemma_queries,
            seed,
        )?)
    } else {
        None
    };
    let subset = if wants(Section::Subset) && in_dataset {
        Some(cluster_subset_accuracy(
            store,
            attack,
            &(0..=k).collect::<Vec<_>>(),
            p.lemma_queries,
            seed,
        )?)
    } else {
        None
    };
    let roc = if wants(Section::Roc) {
        Some(roc_eval(
            store, attack, holdout, &req.query, p.roc_in, p.roc_out, seed,
        )?)
    } else {
        None
    };
    Ok(AttackReport {
        attack: attack.clone(),
        accuracy,
        lemma,
        subset,
        roc,
    })
}

fn attack_checks(r: &AttackReport, checks: &mut Vec<Check>) {
    let name = &r.attack.name;
    if let Some(a) = &r.accuracy {
        if !r.attack.out_of_dataset {
            let e = &a.eq1;
            checks.push(Check::new(
                format!("eq1/{name}"),
                e.holds,
                format!(
                    "diff {:.5} >= gain {:.5} - loss {:.5} - 3*{:.5}",
                    e.accuracy_diff, e.gain_term, e.loss_term, e.band_stderr
                ),
            ));
        }
        checks.push(Check::new(
            format!("never_worse/{name}"),
            a.never_worse,
            format!(
                "acc_drew {:.5}, acc_naive {:.5}, epsilon_r {:.5}, se {:.5}",
                a.acc_drew, a.acc_naive, a.epsilon_r.value, a.diff_stderr
            ),
        ));
        checks.push(Check::new(
            format!("fallback_identity/{name}"),
            a.unreliable_mismatches == 0,
            format!(
                "{} unreliable queries differ from naive",
                a.unreliable_mismatches
            ),
        ));
    }
    if let Some(l) = &r.lemma {
        checks.push(Check::new(
            format!("lemma1/{name}"),
            l.holds,
            format!(
                "lhs {:.5} (se {:.5}) vs bound {:.5}; alpha {:.4}",
                l.lhs, l.lhs_stderr, l.bound, l.alpha
            ),
        ));
    }
    if let Some(s) = &r.subset {
        let ok = s
            .windows(2)
            .all(|w| w[1].accuracy >= w[0].accuracy - SIGMA_BAND * w[0].stderr.hypot(w[1].stderr));
        checks.push(Check::new(
            format!("subset_monotone/{name}"),
            ok,
            format!("{} points", s.len()),
        ));
    }
    if let Some(roc) = &r.roc {
        let band = roc.lowered_in as f64 / roc.n_in as f64;
        checks.push(Check::new(
            format!("auroc/{name}"),
            roc.drew.auroc >= roc.naive.auroc - band - 1e-12,
            format!(
                "drew {:.5} vs naive {:.5}, misrouting band {:.5}",
                roc.drew.auroc, roc.naive.auroc, band
            ),
        ));
    }
}

fn epsilon_section(req: &EvalRequest<'_>, checks: &mut Vec<Check>) -> Result<EpsilonSection> {
    let p = req.params;
    let noiseless = estimate_epsilon_r(
        req.store,
        &AttackConfig::identity(),
        &req.query,
        p.epsilon_trials.min(10_000),
        req.seed,
    )?;
    checks.push(Check::new(
        "epsilon_r@p_A=0",
        noiseless.errors == 0,
        format!(
            "{} errors in {} reliable decodes",
            noiseless.errors, noiseless.reliable
        ),
    ));
    let sweep = epsilon_sweep(
        req.store,
        &req.query,
        &p.epsilon_grid,
        p.epsilon_trials,
        req.seed,
    )?;
    let golden = req
        .golden
        .as_ref()
        .ok_or_else(|| DrewError::Config("epsilon section needs a golden source".into()))?;
    let (status, note) = match &golden.values {
        None => (
            GoldenStatus::CalibrationRequired,
            Some(format!("{} not found", golden.source)),
        ),
        Some(g) => match compare(g, &sweep) {
            GoldenVerdict::Incompatible(why) => (GoldenStatus::CalibrationRequired, Some(why)),
            GoldenVerdict::Compared(c) => {
                checks.extend(c);
                (GoldenStatus::Checked, None)
            }
        },
    };
    Ok(EpsilonSection {
        noiseless,
        sweep,
        golden_source: golden.source.clone(),
        golden_status: status,
        golden_note: note,
    })
}

pub fn run(req: &EvalRequest<'_>) -> Result<FullReport> {
    req.query.validate()?;
    let summary = StoreSummary::of(req.store)?;
    let wants = |s: Section| req.sections.contains(&s);
    let per_attack_sections = [
        Section::Accuracy,
        Section::Lemma,
        Section::Subset,
        Section::Roc,
    ];
    let needs_holdout = wants(Section::Roc) || req.suite.iter().any(|a| a.out_of_dataset);
    let holdout = if needs_holdout {
        holdout_pool(req.params.holdout_size, req.store.dim(), req.seed)
    } else {
        Vec::new()
    };

    let attacks = if per_attack_sections.iter().any(|&s| wants(s)) {
        req.suite
            .par_iter()
            .enumerate()
            .map(|(i, a)| per_attack(req, i as u64, a, &holdout))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut checks = Vec::new();
    for r in &attacks {
        attack_checks(r, &mut checks);
    }

    let epsilon = if wants(Section::Epsilon) {
        Some(epsilon_section(req, &mut checks)?)
    } else {
        None
    };
    let capacity = if wants(Section::CapacityCurve) {
        let rows = capacity_curve(&req.params.capacity_grid)?;
        let decreasing = rows
            .windows(2)
            .all(|w| w[0].p_a >= w[1].p_a || w[1].capacity < w[0].capacity);
        checks.push(Check::new(
            "capacity_decreasing",
            decreasing,
            format!("{} grid points", rows.len()),
        ));
        Some(rows)
    } else {
        None
    };
    let ecc = if wants(Section::EccBench) {
        let spec = req.store.require_partition()?.spec();
        let points = fer_sweep(
            spec,
            &req.query.decoder(),
            req.query.reliability_threshold,
            &req.params.ecc_grid,
            req.params.ecc_frames,
            req.seed,
        )?;
        checks.push(fer_monotone_check(&points));
        Some(points)
    } else {
        None
    };

    let mut sections: Vec<Section> = req.sections.to_vec();
    sections.sort();
    sections.dedup();
    Ok(FullReport {
        seed: req.seed,
        store: summary,
        query: req.query,
        params: req.params.clone(),
        sections,
        attacks,
        epsilon,
        capacity,
        ecc,
        checks,
    })
}

/// Frame-error rate must not drop as the flip rate grows, beyond 2 combined
/// standard errors.
pub fn fer_monotone_check(points: &[FerPoint]) -> Check {
    let mut sorted: Vec<&FerPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.p_a.total_cmp(&b.p_a));
    let bad = sorted
        .windows(2)
        .find(|w| w[1].fer < w[0].fer - 2.0 * w[0].fer_stderr.hypot(w[1].fer_stderr));
    Check::new(
        "fer_monotone",
        bad.is_none(),
        match bad {
            Some(w) => format!(
                "FER drops from {} at p_A={} to {} at p_A={}",
                w[0].fer, w[0].p_a, w[1].fer, w[1].p_a
            ),
            None => format!("{} points", points.len()),
        },
    )
}

/// Flattens a report into curve rows.
pub fn curve_rows(report: &FullReport) -> Vec<CurveRow> {
    let seed = report.seed;
    let mut rows = Vec::new();
    for r in &report.attacks {
        let (name, pa, sg) = (r.attack.name.as_str(), r.attack.p_a, r.attack.sigma);
        let mut push = |metric: &str, value: f64, stderr: Option<f64>| {
            rows.push(CurveRow::new(name, pa, sg, metric, value, stderr, seed))
        };
        if let Some(a) = &r.accuracy {
            let n = a.n_queries;
            push("acc_drew", a.acc_drew, Some(binomial_stderr(a.acc_drew, n)));
            push(
                "acc_naive",
                a.acc_naive,
                Some(binomial_stderr(a.acc_naive, n)),
            );
            push("accuracy_diff", a.eq1.accuracy_diff, Some(a.diff_stderr));
            push(
                "gain_term",
                a.eq1.gain_term,
                Some(binomial_stderr(a.eq1.gain_term, n)),
            );
            push(
                "loss_term",
                a.eq1.loss_term,
                Some(binomial_stderr(a.eq1.loss_term, n)),
            );
            push(
                "p_reliable",
                a.p_reliable,
                Some(binomial_stderr(a.p_reliable, n)),
            );
            push(
                "p_correct_cluster_given_reliable",
                a.p_correct_cluster_given_reliable,
                Some(binomial_stderr(
                    a.p_correct_cluster_given_reliable,
                    a.reliable_count,
                )),
            );
            push("epsilon_r", a.epsilon_r.value, Some(a.epsilon_r.stderr));
        }
        if let Some(l) = &r.lemma {
            let n = l.n_queries;
            push("alpha", l.alpha, Some(binomial_stderr(l.alpha, n)));
            for (p, &v) in &l.alpha_p {
                push(&format!("alpha_p@{p}"), v, Some(binomial_stderr(v, n)));
            }
            push("lemma1_lhs", l.lhs, Some(l.lhs_stderr));
            push("lemma1_bound", l.bound, None);
        }
        if let Some(s) = &r.subset {
            for pt in s {
                push(
                    &format!("subset_accuracy@k={}", pt.k),
                    pt.accuracy,
                    Some(pt.stderr),
                );
            }
        }
        if let Some(roc) = &r.roc {
            push("auroc_drew", roc.drew.auroc, None);
            push("auroc_naive", roc.naive.auroc, None);
            push("tpr_at_fpr_0_1_drew", roc.drew.tpr_at_fpr_0_1, None);
            push("tpr_at_fpr_0_1_naive", roc.naive.tpr_at_fpr_0_1, None);
            push(
                "roc_lowered_fraction",
                roc.lowered_in as f64 / roc.n_in as f64,
                None,
            );
        }
    }
    if let Some(e) = &report.epsilon {
        for pt in &e.sweep.points {
            rows.push(CurveRow::new(
                "bsc",
                pt.p_a,
                0.0,
                "epsilon_r",
                pt.estimate.value,
                Some(pt.estimate.stderr),
                e.sweep.seed,
            ));
        }
    }
    if let Some(cap) = &report.capacity {
        rows.extend(capacity_rows(cap));
    }
    if let Some(fer) = &report.ecc {
        rows.extend(fer_rows(fer, seed));
    }
    rows
}

pub fn capacity_rows(rows: &[CapacityRow]) -> Vec<CurveRow> {
    let mut out = Vec::new();
    for r in rows {
        out.push(CurveRow::new(
            "capacity",
            r.p_a,
            0.0,
            "capacity_rate",
            r.capacity,
            None,
            0,
        ));
        if let Some(red) = r.min_redundancy {
            out.push(CurveRow::new(
                "capacity",
                r.p_a,
                0.0,
                "min_redundancy",
                red,
                None,
                0,
            ));
        }
    }
    out
}

pub fn fer_rows(points: &[FerPoint], seed: u64) -> Vec<CurveRow> {
    let mut out = Vec::new();
    for p in points {
        out.push(CurveRow::new(
            "bsc",
            p.p_a,
            0.0,
            "fer",
            p.fer,
            Some(p.fer_stderr),
            seed,
        ));
        out.push(CurveRow::new(
            "bsc",
            p.p_a,
            0.0,
            "epsilon_r",
            p.epsilon_r,
            Some(binomial_stderr(p.epsilon_r, p.reliable)),
            seed,
        ));
        out.push(CurveRow::new(
            "bsc",
            p.p_a,
            0.0,
            "p_reliable",
            p.reliable as f64 / p.frames as f64,
            None,
            seed,
        ));
    }
    out
}
