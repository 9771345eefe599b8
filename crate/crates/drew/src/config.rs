//! Run configuration and attack suites.
//!
//! A run is described by one JSON document. Command-line flags override
//! individual fields after the file is read.

use std::path::{Path, PathBuf};

use drew_core::channel::AttackConfig;
use drew_core::ecc::{construct_code, PolarCodeSpec, DEFAULT_DESIGN_P, DEFAULT_K, DEFAULT_N};
use drew_core::eval::DEFAULT_P_LIST;
use drew_core::pipeline::QueryConfig;
use serde::{Deserialize, Serialize};

use crate::{DrewError, Result};

/// The shipped suite. Each named augmentation maps to a `(p_A, sigma)`
/// pair chosen by hand; none of these numbers are measurements.
pub const DEFAULT_SUITE_JSON: &str = include_str!("../suites/default.json");

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DREW_OUT_DIR";
pub const FALLBACK_OUT_DIR: &str = "drew-out";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecParams {
    pub k: usize,
    pub n: usize,
    pub design_p: f64,
}

impl Default for SpecParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            n: DEFAULT_N,
            design_p: DEFAULT_DESIGN_P,
        }
    }
}

impl SpecParams {
    pub fn construct(&self) -> Result<PolarCodeSpec> {
        Ok(construct_code(self.k, self.n, self.design_p)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    /// Paired queries per attack for the accuracy sweep.
    pub n_queries: usize,
    /// Oracle-routed queries per attack for the top-p bound and subset table.
    pub lemma_queries: usize,
    pub p_list: Vec<usize>,
    pub roc_in: usize,
    pub roc_out: usize,
    /// Trials per point for the ε_r sweep.
    pub epsilon_trials: u64,
    pub epsilon_grid: Vec<f64>,
    /// Size of the synthetic out-of-dataset embedding pool.
    pub holdout_size: usize,
    pub capacity_grid: Vec<f64>,
    pub ecc_grid: Vec<f64>,
    pub ecc_frames: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            n_queries: 10_000,
            lemma_queries: 2_000,
            p_list: DEFAULT_P_LIST.to_vec(),
            roc_in: 1_000,
            roc_out: 1_000,
            epsilon_trials: 100_000,
            epsilon_grid: vec![0.05, 0.10, 0.15, 0.20, 0.25, 0.30],
            holdout_size: 10_000,
            capacity_grid: (0..50).map(|i| f64::from(i) / 100.0).collect(),
            ecc_grid: vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30],
            ecc_frames: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub store: Option<PathBuf>,
    pub spec: SpecParams,
    pub query: QueryConfig,
    /// Attack suite file; `None` selects the shipped default suite.
    pub suite: Option<PathBuf>,
    /// Golden ε_r file; `None` selects the shipped calibration.
    pub golden: Option<PathBuf>,
    pub seed: u64,
    /// Partition seed for `build`; `None` reuses `seed`.
    pub partition_seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub eval: EvalParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            store: None,
            spec: SpecParams::default(),
            query: QueryConfig::default(),
            suite: None,
            golden: None,
            seed: 7,
            partition_seed: None,
            out_dir: None,
            eval: EvalParams::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DrewError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| DrewError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Flag, then config file, then environment, then `./drew-out`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| {
                std::env::var_os(OUT_DIR_ENV)
                    .filter(|v| !v.is_empty())
                    .map(PathBuf::from)
            })
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
    }

    pub fn resolve_store(&self) -> PathBuf {
        self.store
            .clone()
            .unwrap_or_else(|| self.resolve_out_dir().join("store.drew"))
    }

    pub fn load_suite(&self) -> Result<Vec<AttackConfig>> {
        match &self.suite {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| DrewError::io(path, e))?;
                parse_suite(&text)
            }
            None => parse_suite(DEFAULT_SUITE_JSON),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.query.validate()?;
        let e = &self.eval;
        if e.n_queries == 0
            || e.lemma_queries == 0
            || e.roc_in == 0
            || e.roc_out == 0
            || e.epsilon_trials == 0
        {
            return Err(DrewError::Config(
                "query and trial counts must be positive".into(),
            ));
        }
        if e.holdout_size == 0 {
            return Err(DrewError::Config("holdout_size must be positive".into()));
        }
        Ok(())
    }
}

/// Parses `[{name, p_A, sigma, out_of_dataset}]`, rejecting duplicate names.
pub fn parse_suite(text: &str) -> Result<Vec<AttackConfig>> {
    let suite: Vec<AttackConfig> =
        serde_json::from_str(text).map_err(|e| DrewError::Config(format!("attack suite: {e}")))?;
    if suite.is_empty() {
        return Err(DrewError::Config("attack suite is empty".into()));
    }
    let mut names = std::collections::BTreeSet::new();
    for a in &suite {
        if !names.insert(a.name.as_str()) {
            return Err(DrewError::Config(format!(
                "duplicate attack name `{}`",
                a.name
            )));
        }
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrips() {
        let mut c = RunConfig {
            store: Some("a/b.drew".into()),
            ..Default::default()
        };
        c.query.tau_r = 0.3;
        c.eval.epsilon_grid = vec![0.1 + 0.2, 1.0 / 3.0];
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let empty: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(empty, RunConfig::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 1}"#).is_err());
    }

    #[test]
    fn default_suite_parses() {
        let s = parse_suite(DEFAULT_SUITE_JSON).unwrap();
        assert!(s
            .iter()
            .any(|a| a.name == "no_aug" && a.p_a == 0.0 && a.sigma == 0.0));
        assert!(s.iter().all(|a| !a.out_of_dataset));
        assert!(parse_suite(
            r#"[{"name":"a","p_A":0.1,"sigma":0},{"name":"a","p_A":0.2,"sigma":0}]"#
        )
        .is_err());
        assert!(parse_suite(r#"[{"name":"a","p_A":0.7,"sigma":0}]"#).is_err());
    }
}
