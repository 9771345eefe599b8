use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ecc::capacity_rate;
use crate::{Error, Result};

/// Redundancy above which the table reports "unbounded".
pub const REDUNDANCY_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub p_a: f64,
    pub capacity: f64,
    /// Minimum `n / k`; `None` when unbounded (above [`REDUNDANCY_CAP`]).
    pub min_redundancy: Option<f64>,
}

pub fn capacity_curve(grid: &[f64]) -> Result<Vec<CapacityRow>> {
    grid.iter()
        .map(|&p_a| {
            if !(0.0..0.5).contains(&p_a) {
                return Err(Error::Probability {
                    value: p_a,
                    range: "[0, 0.5)",
                });
            }
            let capacity = capacity_rate(p_a);
            let r = 1.0 / capacity;
            Ok(CapacityRow {
                p_a,
                capacity,
                min_redundancy: (r <= REDUNDANCY_CAP).then_some(r),
            })
        })
        .collect()
}
