use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

fn check_bits(bits: &[u8]) -> Result<()> {
    match bits.iter().find(|&&b| b > 1) {
        Some(&b) => Err(Error::BitValue(b)),
        None => Ok(()),
    }
}

fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Argument(alloc::format!(
                "bad bit character {other:?}"
            ))),
        })
        .collect()
}

fn write_bits(bits: &[u8], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for &b in bits {
        f.write_str(if b == 1 { "1" } else { "0" })?;
    }
    Ok(())
}

macro_rules! bit_string_serde {
    ($ty:ident) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write_bits(&self.0, f)
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                Self::from_bits(parse_bits(s)?)
            }
        }
    };
}

/// A `k`-bit cluster label, most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClusterCode(Vec<u8>);

impl ClusterCode {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidCode(
                "cluster code must have at least one bit".into(),
            ));
        }
        check_bits(&bits)?;
        Ok(Self(bits))
    }

    /// Binary representation of `index` on `k` bits.
    pub fn from_index(index: u64, k: usize) -> Result<Self> {
        if k == 0 || k > 63 {
            return Err(Error::InvalidCode(alloc::format!("k={k} outside 1..=63")));
        }
        if index >> k != 0 {
            return Err(Error::ClusterRange {
                cluster: index,
                k: k as u32,
            });
        }
        Ok(Self(
            (0..k).rev().map(|s| ((index >> s) & 1) as u8).collect(),
        ))
    }

    /// Integer value of the code. Codes longer than 64 bits keep the low 64.
    pub fn index(&self) -> u64 {
        self.0
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Length {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }
}

bit_string_serde!(ClusterCode);

/// An `n`-bit watermark key as read from (or written into) content.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WatermarkKey(Vec<u8>);

impl WatermarkKey {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        check_bits(&bits)?;
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Self(alloc::vec![0; n])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Length {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }

    pub fn hamming_distance(&self, other: &Self) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    /// Packs bit `i` into byte `i / 8` at bit position `i % 8`.
    pub fn to_packed_le(&self) -> Vec<u8> {
        let mut out = alloc::vec![0u8; self.0.len().div_ceil(8)];
        for (i, &b) in self.0.iter().enumerate() {
            out[i / 8] |= b << (i % 8);
        }
        out
    }

    pub fn from_packed_le(bytes: &[u8], n: usize) -> Result<Self> {
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::Length {
                expected: n.div_ceil(8),
                actual: bytes.len(),
            });
        }
        if !n.is_multiple_of(8) && bytes[n / 8] >> (n % 8) != 0 {
            return Err(Error::InvalidCode(
                "nonzero padding bits in packed key".into(),
            ));
        }
        Ok(Self(
            (0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect(),
        ))
    }
}

bit_string_serde!(WatermarkKey);

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn cluster_code_index_roundtrip() {
        let c = ClusterCode::from_index(0b1011, 4).unwrap();
        assert_eq!(c.bits(), &[1, 0, 1, 1]);
        assert_eq!(c.index(), 11);
        assert_eq!(c.to_string(), "1011");
        assert_eq!("1011".parse::<ClusterCode>().unwrap(), c);
        assert!(ClusterCode::from_index(16, 4).is_err());
        assert!(ClusterCode::from_index(0, 0).is_err());
    }

    #[test]
    fn rejects_non_binary() {
        assert_eq!(
            WatermarkKey::from_bits(alloc::vec![0, 2]),
            Err(Error::BitValue(2))
        );
        assert!("012".parse::<WatermarkKey>().is_err());
    }

    #[test]
    fn packing_is_lsb_first() {
        let k: WatermarkKey = "1000000001".parse().unwrap();
        assert_eq!(k.to_packed_le(), alloc::vec![0b0000_0001, 0b0000_0010]);
        assert_eq!(
            WatermarkKey::from_packed_le(&k.to_packed_le(), 10).unwrap(),
            k
        );
    }
}
