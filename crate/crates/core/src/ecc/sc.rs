use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ClusterCode, PolarCodeSpec};
use crate::{Error, Result};

/// Check-node (f) update rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckNode {
    /// `2 atanh(tanh(a/2) tanh(b/2))`, evaluated in a stable log form.
    #[default]
    Exact,
    /// `sign(a) sign(b) min(|a|, |b|)`. Faster, overstates magnitudes.
    MinSum,
}

/// Which decision LLR the reliability score is taken from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReliabilityMode {
    /// Magnitude of the last information bit in decoding order.
    #[default]
    LastBit,
    /// Minimum magnitude over all information bits.
    MinBit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub code: ClusterCode,
    /// Score selected by the decoder's [`ReliabilityMode`].
    pub reliability_score: f64,
    pub reliable: bool,
    pub last_bit_score: f64,
    pub min_bit_score: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScDecoder {
    pub check_node: CheckNode,
    pub reliability: ReliabilityMode,
}

#[inline]
fn boxplus_exact(a: f64, b: f64) -> f64 {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    let m = libm::fmin(libm::fabs(a), libm::fabs(b));
    if m < 1.0 {
        // Near zero the two log1p corrections cancel to within rounding of
        // `m` itself, so use the product form, which keeps full relative
        // precision there. One factor is below tanh(1/2), so atanh is finite.
        let t = libm::tanh(libm::fabs(a) / 2.0) * libm::tanh(libm::fabs(b) / 2.0);
        return sign * 2.0 * libm::atanh(t);
    }
    sign * m + libm::log1p(libm::exp(-libm::fabs(a + b)))
        - libm::log1p(libm::exp(-libm::fabs(a - b)))
}

#[inline]
fn boxplus_min_sum(a: f64, b: f64) -> f64 {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    sign * libm::fmin(libm::fabs(a), libm::fabs(b))
}

struct Walk<'a> {
    frozen: &'a [bool],
    /// `info_before[i]` = number of information positions `< i`.
    info_before: &'a [usize],
    check: fn(f64, f64) -> f64,
    decisions: &'a mut [f64],
    u: &'a mut [u8],
}

impl Walk<'_> {
    /// Decodes the sub-block of input bits starting at `offset` from its
    /// channel LLRs, writing the re-encoded sub-codeword into `x`.
    fn run(&mut self, llr: &[f64], offset: usize, scratch: &mut [f64], x: &mut [u8]) {
        let n = llr.len();
        if self.info_before[offset + n] == self.info_before[offset] {
            // all frozen: the sub-codeword is zero
            x.fill(0);
            return;
        }
        if n == 1 {
            let l = llr[0];
            let bit = if self.frozen[offset] {
                0
            } else {
                u8::from(l < 0.0)
            };
            self.decisions[offset] = l;
            self.u[offset] = bit;
            x[0] = bit;
            return;
        }
        let half = n / 2;
        let (child, rest) = scratch.split_at_mut(half);
        let (first, second) = llr.split_at(half);
        for ((c, &a), &b) in child.iter_mut().zip(first).zip(second) {
            *c = (self.check)(a, b);
        }
        let (xa, xb) = x.split_at_mut(half);
        self.run(child, offset, rest, xa);
        for (((c, &a), &b), &ua) in child.iter_mut().zip(first).zip(second).zip(xa.iter()) {
            *c = if ua == 0 { b + a } else { b - a };
        }
        self.run(child, offset + half, rest, xb);
        for (a, &b) in xa.iter_mut().zip(xb.iter()) {
            *a ^= b;
        }
    }
}

impl ScDecoder {
    pub fn new(check_node: CheckNode, reliability: ReliabilityMode) -> Self {
        Self {
            check_node,
            reliability,
        }
    }

    /// Successive-cancellation decode of `block_len` channel LLRs.
    /// `reliable` holds iff the selected score is at least `threshold`.
    pub fn decode(
        &self,
        spec: &PolarCodeSpec,
        llrs: &[f64],
        threshold: f64,
    ) -> Result<DecodeOutcome> {
        let n = spec.block_len();
        if llrs.len() != n {
            return Err(Error::Length {
                expected: n,
                actual: llrs.len(),
            });
        }
        if let Some(i) = llrs.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFiniteLlr(i));
        }
        if !(threshold >= 0.0 && threshold.is_finite()) {
            return Err(Error::Threshold(threshold));
        }

        let mut info_before = Vec::with_capacity(n + 1);
        info_before.push(0);
        let mut acc = 0;
        for &f in spec.frozen_mask() {
            acc += usize::from(!f);
            info_before.push(acc);
        }
        let mut decisions = alloc::vec![0.0; n];
        let mut u = alloc::vec![0u8; n];
        let mut scratch = alloc::vec![0.0; n];
        let mut x = alloc::vec![0u8; n];
        let mut walk = Walk {
            frozen: spec.frozen_mask(),
            info_before: &info_before,
            check: match self.check_node {
                CheckNode::Exact => boxplus_exact,
                CheckNode::MinSum => boxplus_min_sum,
            },
            decisions: &mut decisions,
            u: &mut u,
        };
        walk.run(llrs, 0, &mut scratch, &mut x);

        let info = spec.info_set();
        let code = ClusterCode::from_bits(info.iter().map(|&i| u[i]).collect())?;
        let last_bit_score = libm::fabs(decisions[*info.last().expect("k >= 1")]);
        let min_bit_score = info
            .iter()
            .map(|&i| libm::fabs(decisions[i]))
            .fold(f64::INFINITY, libm::fmin);
        let reliability_score = match self.reliability {
            ReliabilityMode::LastBit => last_bit_score,
            ReliabilityMode::MinBit => min_bit_score,
        };
        Ok(DecodeOutcome {
            code,
            reliability_score,
            reliable: reliability_score >= threshold,
            last_bit_score,
            min_bit_score,
        })
    }
}

/// SC decode with the exact check node and last-bit reliability.
pub fn decode(spec: &PolarCodeSpec, llrs: &[f64], threshold: f64) -> Result<DecodeOutcome> {
    ScDecoder::default().decode(spec, llrs, threshold)
}
