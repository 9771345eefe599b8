use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ClusterCode, WatermarkKey, KNOWN_BIT_LLR};
use crate::{Error, Result};

/// Largest supported native block length.
const MAX_BLOCK_LEN: usize = 1 << 16;

/// A shortened polar code taking `k` information bits to `n` transmitted bits.
///
/// Immutable after construction. Serializes to
/// `{k, n, block_len, design_p, frozen_set, shortened_set}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDocument", into = "SpecDocument")]
pub struct PolarCodeSpec {
    k: usize,
    n: usize,
    block_len: usize,
    design_p: f64,
    frozen_set: Vec<usize>,
    shortened_set: Vec<usize>,
    info_set: Vec<usize>,
    frozen_mask: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct SpecDocument {
    k: usize,
    n: usize,
    block_len: usize,
    design_p: f64,
    frozen_set: Vec<usize>,
    shortened_set: Vec<usize>,
}

impl From<PolarCodeSpec> for SpecDocument {
    fn from(s: PolarCodeSpec) -> Self {
        Self {
            k: s.k,
            n: s.n,
            block_len: s.block_len,
            design_p: s.design_p,
            frozen_set: s.frozen_set,
            shortened_set: s.shortened_set,
        }
    }
}

impl TryFrom<SpecDocument> for PolarCodeSpec {
    type Error = Error;

    fn try_from(d: SpecDocument) -> Result<Self> {
        check_params(d.k, d.n, d.design_p)?;
        if d.block_len != d.n.next_power_of_two() {
            return Err(Error::InvalidCode(alloc::format!(
                "block_len {} is not the smallest power of two >= n={}",
                d.block_len,
                d.n
            )));
        }
        let expected_short: Vec<usize> = (d.n..d.block_len).collect();
        if d.shortened_set != expected_short {
            return Err(Error::InvalidCode(
                "shortened_set must be the trailing block positions".into(),
            ));
        }
        if d.frozen_set.len() + d.k != d.block_len {
            return Err(Error::InvalidCode("|frozen_set| + k != block_len".into()));
        }
        if d.frozen_set.windows(2).any(|w| w[0] >= w[1])
            || d.frozen_set.last().is_some_and(|&i| i >= d.block_len)
        {
            return Err(Error::InvalidCode(
                "frozen_set must be strictly increasing and in range".into(),
            ));
        }
        let mut frozen_mask = alloc::vec![false; d.block_len];
        for &i in &d.frozen_set {
            frozen_mask[i] = true;
        }
        if d.shortened_set.iter().any(|&i| !frozen_mask[i]) {
            return Err(Error::InvalidCode(
                "shortened positions must be frozen".into(),
            ));
        }
        Ok(Self::from_parts(d.k, d.n, d.design_p, frozen_mask))
    }
}

fn check_params(k: usize, n: usize, design_p: f64) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidCode(alloc::format!(
            "need 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if n > MAX_BLOCK_LEN {
        return Err(Error::InvalidCode(alloc::format!(
            "n={n} exceeds {MAX_BLOCK_LEN}"
        )));
    }
    if !(design_p > 0.0 && design_p < 0.5) {
        return Err(Error::Probability {
            value: design_p,
            range: "(0, 0.5)",
        });
    }
    Ok(())
}

/// Bhattacharyya parameter of every synthetic input channel, natural order.
///
/// The top-level split sends the first half of `u` through the degraded
/// channel (`2z - z^2`) and the second half through the upgraded one (`z^2`),
/// so the bits of an index, read from the most significant, select the
/// branch at each level.
fn bhattacharyya(block_len: usize, design_p: f64) -> Vec<f64> {
    let z0 = 2.0 * libm::sqrt(design_p * (1.0 - design_p));
    let levels = block_len.trailing_zeros();
    (0..block_len)
        .map(|i| {
            (0..levels).rev().fold(z0, |z, level| {
                if (i >> level) & 1 == 0 {
                    2.0 * z - z * z
                } else {
                    z * z
                }
            })
        })
        .collect()
}

/// Builds the `(k -> n)` code: native length is the next power of two, the
/// trailing `block_len - n` positions are shortened, and the `k` non-shortened
/// indices with the smallest Bhattacharyya parameter carry information (ties
/// go to the higher index).
pub fn construct_code(k: usize, n: usize, design_p: f64) -> Result<PolarCodeSpec> {
    check_params(k, n, design_p)?;
    let block_len = n.next_power_of_two();
    let z = bhattacharyya(block_len, design_p);
    let mut candidates: Vec<usize> = (0..n).collect();
    candidates.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(b.cmp(&a)));
    let mut frozen_mask = alloc::vec![true; block_len];
    for &i in &candidates[..k] {
        frozen_mask[i] = false;
    }
    Ok(PolarCodeSpec::from_parts(k, n, design_p, frozen_mask))
}

impl PolarCodeSpec {
    fn from_parts(k: usize, n: usize, design_p: f64, frozen_mask: Vec<bool>) -> Self {
        let block_len = frozen_mask.len();
        let frozen_set = (0..block_len).filter(|&i| frozen_mask[i]).collect();
        let info_set = (0..block_len).filter(|&i| !frozen_mask[i]).collect();
        Self {
            k,
            n,
            block_len,
            design_p,
            frozen_set,
            shortened_set: (n..block_len).collect(),
            info_set,
            frozen_mask,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn design_p(&self) -> f64 {
        self.design_p
    }

    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen_set
    }

    pub fn shortened_set(&self) -> &[usize] {
        &self.shortened_set
    }

    /// Information positions in ascending (= decoding) order.
    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen_mask
    }

    /// Code rate `k / n`.
    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }
}

/// In-place `x <- x · F^{⊗m}` over GF(2). Its own inverse.
pub fn polar_transform(bits: &mut [u8]) {
    debug_assert!(bits.len().is_power_of_two());
    let n = bits.len();
    let mut half = 1;
    while half < n {
        for block in bits.chunks_exact_mut(2 * half) {
            let (a, b) = block.split_at_mut(half);
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x ^= *y;
            }
        }
        half *= 2;
    }
}

/// Encodes a cluster code into its `n`-bit key. Code bits fill the
/// information positions in ascending order, most significant bit first.
pub fn encode(spec: &PolarCodeSpec, code: &ClusterCode) -> Result<WatermarkKey> {
    if code.len() != spec.k {
        return Err(Error::Length {
            expected: spec.k,
            actual: code.len(),
        });
    }
    let mut u = alloc::vec![0u8; spec.block_len];
    for (&pos, &bit) in spec.info_set.iter().zip(code.bits()) {
        u[pos] = bit;
    }
    polar_transform(&mut u);
    debug_assert!(u[spec.n..].iter().all(|&b| b == 0));
    u.truncate(spec.n);
    WatermarkKey::from_bits(u)
}

/// Channel LLRs for a key received over a BSC with crossover `channel_p`.
/// Shortened positions get [`KNOWN_BIT_LLR`].
pub fn llr_from_key(spec: &PolarCodeSpec, key: &WatermarkKey, channel_p: f64) -> Result<Vec<f64>> {
    if !(channel_p > 0.0 && channel_p < 0.5) {
        return Err(Error::Probability {
            value: channel_p,
            range: "(0, 0.5)",
        });
    }
    if key.len() != spec.n {
        return Err(Error::Length {
            expected: spec.n,
            actual: key.len(),
        });
    }
    let mag = libm::log((1.0 - channel_p) / channel_p);
    let mut llrs = Vec::with_capacity(spec.block_len);
    llrs.extend(key.bits().iter().map(|&y| if y == 0 { mag } else { -mag }));
    llrs.resize(spec.block_len, KNOWN_BIT_LLR);
    Ok(llrs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_code_dimensions() {
        let spec = construct_code(10, 100, 0.1).unwrap();
        assert_eq!(spec.block_len(), 128);
        assert_eq!(spec.frozen_set().len(), 118);
        assert_eq!(spec.shortened_set().len(), 28);
        assert_eq!(spec.shortened_set(), &(100..128).collect::<Vec<_>>()[..]);
        assert!(spec.info_set().iter().all(|&i| i < 100));
    }

    #[test]
    fn bhattacharyya_by_hand_for_four() {
        // z0 = 2*sqrt(0.09) = 0.6; bad = 0.84, good = 0.36
        let z = bhattacharyya(4, 0.1);
        let expect = [
            2.0 * 0.84 - 0.84 * 0.84,
            0.84 * 0.84,
            2.0 * 0.36 - 0.36 * 0.36,
            0.36 * 0.36,
        ];
        for (a, b) in z.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn k1_n4_is_repetition() {
        let spec = construct_code(1, 4, 0.1).unwrap();
        assert_eq!(spec.info_set(), &[3]);
        let key = encode(&spec, &ClusterCode::from_index(1, 1).unwrap()).unwrap();
        assert_eq!(key.bits(), &[1, 1, 1, 1]);
    }

    #[test]
    fn rate_one_has_no_frozen_bits() {
        let spec = construct_code(4, 4, 0.1).unwrap();
        assert!(spec.frozen_set().is_empty());
        // u = 1000 selects row 0 of F^{⊗2} = [1 0 0 0]
        let key = encode(&spec, &"1000".parse().unwrap()).unwrap();
        assert_eq!(key.bits(), &[1, 0, 0, 0]);
        // u = 0001 selects row 3 = [1 1 1 1]; u = 0100 selects row 1 = [1 1 0 0]
        assert_eq!(
            encode(&spec, &"0001".parse().unwrap()).unwrap().bits(),
            &[1, 1, 1, 1]
        );
        assert_eq!(
            encode(&spec, &"0100".parse().unwrap()).unwrap().bits(),
            &[1, 1, 0, 0]
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(construct_code(11, 10, 0.1).is_err());
        assert!(construct_code(0, 10, 0.1).is_err());
        assert!(construct_code(2, 10, 0.0).is_err());
        assert!(construct_code(2, 10, 0.5).is_err());
        assert!(construct_code(2, 10, f64::NAN).is_err());
    }

    #[test]
    fn zero_code_encodes_to_zero_key() {
        let spec = construct_code(10, 100, 0.1).unwrap();
        let key = encode(&spec, &ClusterCode::from_index(0, 10).unwrap()).unwrap();
        assert_eq!(key, WatermarkKey::zeros(100));
        assert!(encode(&spec, &ClusterCode::from_index(0, 9).unwrap()).is_err());
    }

    #[test]
    fn llr_values() {
        let spec = construct_code(10, 100, 0.1).unwrap();
        let mut bits = alloc::vec![0u8; 100];
        bits[1] = 1;
        let llrs = llr_from_key(&spec, &WatermarkKey::from_bits(bits).unwrap(), 0.1).unwrap();
        assert_eq!(llrs.len(), 128);
        assert!((llrs[0] - 2.197_224_577_336_219_6).abs() < 1e-12);
        assert!((llrs[1] + 2.197_224_577_336_219_6).abs() < 1e-12);
        assert!(llrs[100..].iter().all(|&l| l == KNOWN_BIT_LLR));
        assert!(llr_from_key(&spec, &WatermarkKey::zeros(100), 0.5).is_err());
        assert!(llr_from_key(&spec, &WatermarkKey::zeros(99), 0.1).is_err());
    }

    #[test]
    fn transform_is_involution() {
        let mut v = alloc::vec![1, 0, 1, 1, 0, 0, 1, 0];
        let orig = v.clone();
        polar_transform(&mut v);
        polar_transform(&mut v);
        assert_eq!(v, orig);
    }
}
