//! Binary store format, all integers little endian:
//!
//! ```text
//! "DREWSTOR"                 8 bytes
//! version                    u16 (= 1)
//! d                          u32
//! k                          u32
//! N                          u64
//! blob length                u32
//! blob                       JSON: {k, n, block_len, design_p, frozen_set, shortened_set, partition_seed}
//! N records:
//!   id                       u64
//!   cluster                  u16
//!   key                      ceil(n / 8) bytes, bit i in byte i/8 at bit i%8
//!   embedding                d x f32
//! checksum                   u64, XXH64 (seed 0) of every preceding byte
//! ```
//!
//! The checksum is verified before anything is parsed, so a corrupt file
//! never yields a partial store.

use std::path::Path;

use drew_core::ecc::{PolarCodeSpec, WatermarkKey};
use drew_core::store::Store;
use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::report::write_atomic;
use crate::{DrewError, Result};

pub const MAGIC: &[u8; 8] = b"DREWSTOR";
pub const VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    #[serde(flatten)]
    spec: PolarCodeSpec,
    partition_seed: u64,
}

pub fn checksum(bytes: &[u8]) -> u64 {
    XxHash64::oneshot(0, bytes)
}

pub fn to_bytes(store: &Store) -> Result<Vec<u8>> {
    let p = store.require_partition()?;
    let spec = p.spec();
    let blob = serde_json::to_vec(&Meta {
        spec: spec.clone(),
        partition_seed: p.seed(),
    })?;
    let key_bytes = spec.n().div_ceil(8);
    let mut out =
        Vec::with_capacity(38 + blob.len() + store.len() * (10 + key_bytes + 4 * store.dim()) + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.dim() as u32).to_le_bytes());
    out.extend_from_slice(&p.k().to_le_bytes());
    out.extend_from_slice(&(store.len() as u64).to_le_bytes());
    out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
    out.extend_from_slice(&blob);
    for e in store.entries() {
        out.extend_from_slice(&e.id.to_le_bytes());
        out.extend_from_slice(&(e.cluster.expect("partitioned") as u16).to_le_bytes());
        out.extend_from_slice(&e.key.expect("partitioned").to_packed_le());
        for x in e.embedding {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| DrewError::Truncated(format!("reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Store> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(DrewError::Magic);
    }
    if bytes.len() < 10 {
        return Err(DrewError::Truncated("header".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != VERSION {
        return Err(DrewError::Version(version));
    }
    if bytes.len() < 8 + 10 {
        return Err(DrewError::Truncated("header".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let computed = checksum(body);
    if stored != computed {
        return Err(DrewError::Checksum { stored, computed });
    }

    let mut r = Reader { buf: body, pos: 10 };
    let d = r.u32("d")? as usize;
    let k = r.u32("k")?;
    let count = r.u64("N")?;
    let blob_len = r.u32("blob length")? as usize;
    let meta: Meta = serde_json::from_slice(r.take(blob_len, "spec blob")?)?;
    if meta.spec.k() != k as usize {
        return Err(DrewError::Truncated(format!(
            "header k={k} but spec k={}",
            meta.spec.k()
        )));
    }
    let n = meta.spec.n();
    let record = 10 + n.div_ceil(8) + 4 * d;
    let expected = (count as usize)
        .checked_mul(record)
        .ok_or_else(|| DrewError::Truncated("record count".into()))?;
    if body.len() - r.pos != expected {
        return Err(DrewError::Truncated(format!(
            "expected {expected} record bytes, found {}",
            body.len() - r.pos
        )));
    }

    let mut rows = Vec::with_capacity(count as usize);
    let mut clusters = Vec::with_capacity(count as usize);
    let mut keys = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let id = r.u64("id")?;
        clusters.push(u32::from(r.u16("cluster")?));
        keys.push(WatermarkKey::from_packed_le(
            r.take(n.div_ceil(8), "key")?,
            n,
        )?);
        let v: Vec<f32> = r
            .take(4 * d, "embedding")?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        rows.push((id, v));
    }
    let store = Store::from_unit_rows(rows, d)?.with_clusters(
        k,
        meta.partition_seed,
        meta.spec,
        clusters,
    )?;
    for (e, key) in store.entries().zip(&keys) {
        if e.key != Some(key) {
            return Err(drew_core::Error::KeyMismatch(e.id).into());
        }
    }
    Ok(store)
}

pub fn save(store: &Store, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(store)?)
}

pub fn load(path: &Path) -> Result<Store> {
    let bytes = std::fs::read(path).map_err(|e| DrewError::io(path, e))?;
    from_bytes(&bytes)
}

/// Loads and checks the embedding dimension.
pub fn load_with_dim(path: &Path, d: usize) -> Result<Store> {
    let store = load(path)?;
    if store.dim() != d {
        return Err(DrewError::Dimension {
            expected: d,
            found: store.dim(),
        });
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use drew_core::ecc::construct_code;
    use drew_core::synth::sphere_rows;

    fn sample(d: usize) -> Store {
        let spec = construct_code(4, 20, 0.1).unwrap();
        Store::ingest(sphere_rows(50, d, 2), d)
            .unwrap()
            .assign_clusters(4, 9, &spec)
            .unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let s = sample(8);
        let bytes = to_bytes(&s).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn any_corrupted_byte_is_rejected() {
        let bytes = to_bytes(&sample(4)).unwrap();
        for i in (0..bytes.len()).step_by(7) {
            let mut bad = bytes.clone();
            bad[i] ^= 0x10;
            assert!(from_bytes(&bad).is_err(), "byte {i}");
        }
        let mut bad = bytes.clone();
        let mid = bytes.len() / 2;
        bad[mid] ^= 1;
        assert!(matches!(from_bytes(&bad), Err(DrewError::Checksum { .. })));
    }

    #[test]
    fn truncation_and_header_errors() {
        let bytes = to_bytes(&sample(4)).unwrap();
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(matches!(
            from_bytes(b"NOTSTORE........"),
            Err(DrewError::Magic)
        ));
        let mut v = bytes.clone();
        v[8] = 9;
        assert!(matches!(from_bytes(&v), Err(DrewError::Version(9))));
    }

    #[test]
    fn unpartitioned_store_cannot_be_saved() {
        let raw = Store::ingest(sphere_rows(3, 4, 1), 4).unwrap();
        assert!(to_bytes(&raw).is_err());
    }
}
