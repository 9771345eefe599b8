//! Golden ε_r numbers: produced once by a calibration run, then used as the
//! reference every later run is compared against.

use drew_core::channel::AttackConfig;
use drew_core::ecc::{CheckNode, ReliabilityMode};
use drew_core::eval::{binomial_stderr, estimate_epsilon_r, EpsilonEstimate, SIGMA_BAND};
use drew_core::pipeline::QueryConfig;
use drew_core::store::Store;
use serde::{Deserialize, Serialize};

use crate::report::Check;
use crate::Result;

/// The calibration shipped with the default configuration.
pub const DEFAULT_GOLDEN_JSON: &str = include_str!("../golden/epsilon_r.json");

/// Everything the estimate depends on besides the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldenSetup {
    pub k: usize,
    pub n: usize,
    pub design_p: f64,
    pub reliability_threshold: f64,
    pub reliability_mode: ReliabilityMode,
    pub check_node: CheckNode,
}

impl GoldenSetup {
    pub fn of(store: &Store, cfg: &QueryConfig) -> Result<Self> {
        let spec = store.require_partition()?.spec();
        Ok(Self {
            k: spec.k(),
            n: spec.n(),
            design_p: spec.design_p(),
            reliability_threshold: cfg.reliability_threshold,
            reliability_mode: cfg.reliability_mode,
            check_node: cfg.check_node,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldenPoint {
    #[serde(rename = "p_A")]
    pub p_a: f64,
    pub estimate: EpsilonEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenEpsilon {
    pub setup: GoldenSetup,
    pub seed: u64,
    pub trials: u64,
    pub points: Vec<GoldenPoint>,
}

/// ε_r at every grid point. Point `i` uses seed `seed + i` so points are
/// independent.
pub fn epsilon_sweep(
    store: &Store,
    cfg: &QueryConfig,
    grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<GoldenEpsilon> {
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &p_a)| {
            let attack = AttackConfig::new(format!("bsc_{p_a}"), p_a, 0.0, false)?;
            let estimate =
                estimate_epsilon_r(store, &attack, cfg, trials, seed.wrapping_add(i as u64))?;
            Ok(GoldenPoint { p_a, estimate })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GoldenEpsilon {
        setup: GoldenSetup::of(store, cfg)?,
        seed,
        trials,
        points,
    })
}

pub enum GoldenVerdict {
    /// The golden file was made for another setup or grid; a new
    /// calibration is needed.
    Incompatible(String),
    Compared(Vec<Check>),
}

fn stderr_of(e: &EpsilonEstimate) -> f64 {
    // Recomputed from the counts so that an edited value cannot carry a
    // matching edited error bar.
    binomial_stderr(e.value, e.reliable)
}

/// Two-sample comparison: each point must agree with the golden value
/// within 3 combined standard errors.
pub fn compare(golden: &GoldenEpsilon, fresh: &GoldenEpsilon) -> GoldenVerdict {
    if golden.setup != fresh.setup {
        return GoldenVerdict::Incompatible(format!(
            "golden setup {:?} differs from run setup {:?}",
            golden.setup, fresh.setup
        ));
    }
    let grid = |g: &GoldenEpsilon| g.points.iter().map(|p| p.p_a).collect::<Vec<_>>();
    if grid(golden) != grid(fresh) {
        return GoldenVerdict::Incompatible(format!(
            "golden grid {:?} differs from run grid {:?}",
            grid(golden),
            grid(fresh)
        ));
    }
    let checks = golden
        .points
        .iter()
        .zip(&fresh.points)
        .map(|(g, f)| {
            let band = SIGMA_BAND * stderr_of(&g.estimate).hypot(stderr_of(&f.estimate));
            let diff = (f.estimate.value - g.estimate.value).abs();
            let recount = EpsilonEstimate::from_counts(
                g.estimate.trials,
                g.estimate.reliable,
                g.estimate.errors,
            );
            let consistent = g.estimate.value == recount.value;
            Check::new(
                format!("epsilon_r@p_A={}", g.p_a),
                consistent && diff <= band,
                format!(
                    "run {:.6} vs golden {:.6}, |diff| {:.3e}, band {:.3e}",
                    f.estimate.value, g.estimate.value, diff, band
                ),
            )
        })
        .collect();
    GoldenVerdict::Compared(checks)
}

pub fn parse(text: &str) -> Result<GoldenEpsilon> {
    Ok(serde_json::from_str(text)?)
}
