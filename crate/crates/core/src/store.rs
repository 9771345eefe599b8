//! Unit-norm embedding store, random cluster partition, exact search.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ecc::{encode, ClusterCode, PolarCodeSpec, WatermarkKey};
use crate::rng::substream;
use crate::{Error, Result};

/// Tolerance on `‖v‖ = 1` for stored and query vectors.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Largest supported cluster-bit count (cluster labels are stored as u16).
pub const MAX_CLUSTER_BITS: u32 = 16;

/// Rows scanned per block in [`Store::scan_batch`].
const SCAN_BLOCK_ROWS: usize = 256;

/// Dot product with a fixed 8-lane accumulation order, so the similarity of
/// a (query, entry) pair is bit-identical on every scan path.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    for (l, (x, y)) in ra.iter().zip(rb).enumerate() {
        acc[l] += x * y;
    }
    reduce(&acc)
}

#[inline]
fn reduce(acc: &[f32; 8]) -> f32 {
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))
}

/// Four [`dot`]s against one row, sharing the row loads. Each result is
/// bit-identical to the corresponding [`dot`].
#[inline]
fn dot4(q: [&[f32]; 4], row: &[f32]) -> [f32; 4] {
    let d = row.len();
    let q = q.map(|v| &v[..d]);
    let mut acc = [[0.0f32; 8]; 4];
    let rows = row.chunks_exact(8);
    let tail = rows.remainder();
    let mut qc = q.map(|v| v.chunks_exact(8));
    for r in rows {
        let r: &[f32; 8] = r.try_into().expect("chunk of 8");
        for (a, it) in acc.iter_mut().zip(qc.iter_mut()) {
            let qv: &[f32; 8] = it
                .next()
                .expect("same length")
                .try_into()
                .expect("chunk of 8");
            for l in 0..8 {
                a[l] += qv[l] * r[l];
            }
        }
    }
    let full = d - tail.len();
    for (a, qv) in acc.iter_mut().zip(q) {
        for (l, (x, y)) in qv[full..].iter().zip(tail).enumerate() {
            a[l] += x * y;
        }
    }
    [
        reduce(&acc[0]),
        reduce(&acc[1]),
        reduce(&acc[2]),
        reduce(&acc[3]),
    ]
}

/// Normalizes in f64 and narrows to f32.
pub fn normalize(v: &[f64]) -> Option<Vec<f32>> {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    Some(v.iter().map(|x| (x / norm) as f32).collect())
}

pub fn norm(v: &[f32]) -> f64 {
    libm::sqrt(v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>())
}

/// One search hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub id: u64,
    pub similarity: f64,
}

impl Match {
    /// Rank order: higher similarity first, then lower id.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .similarity
            .total_cmp(&self.similarity)
            .then(self.id.cmp(&other.id))
    }

    /// True if `self` ranks strictly ahead of `other`.
    pub fn beats(&self, other: &Self) -> bool {
        self.rank_cmp(other) == Ordering::Less
    }
}

/// Hits in rank order, at most the requested length.
pub type MatchList = Vec<Match>;

/// Search scope: one cluster or the whole store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Full,
    Cluster(u32),
}

/// Borrowed view of one entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreEntry<'a> {
    pub id: u64,
    pub embedding: &'a [f32],
    pub cluster: Option<u32>,
    pub key: Option<&'a WatermarkKey>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    k: u32,
    seed: u64,
    spec: PolarCodeSpec,
    /// Cluster label per entry, in entry order.
    clusters: Vec<u32>,
    /// Encoded key per cluster label.
    keys: Vec<WatermarkKey>,
    /// CSR layout: members of cluster `c` are `members[offsets[c]..offsets[c + 1]]`.
    offsets: Vec<usize>,
    members: Vec<u32>,
}

impl Partition {
    fn build(k: u32, seed: u64, spec: PolarCodeSpec, clusters: Vec<u32>) -> Result<Self> {
        let count = 1usize << k;
        let keys = (0..count as u64)
            .map(|c| encode(&spec, &ClusterCode::from_index(c, k as usize)?))
            .collect::<Result<Vec<_>>>()?;
        let mut offsets = alloc::vec![0usize; count + 1];
        for &c in &clusters {
            offsets[c as usize + 1] += 1;
        }
        for c in 0..count {
            offsets[c + 1] += offsets[c];
        }
        let mut fill = offsets.clone();
        let mut members = alloc::vec![0u32; clusters.len()];
        for (i, &c) in clusters.iter().enumerate() {
            members[fill[c as usize]] = i as u32;
            fill[c as usize] += 1;
        }
        Ok(Self {
            k,
            seed,
            spec,
            clusters,
            keys,
            offsets,
            members,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &PolarCodeSpec {
        &self.spec
    }

    pub fn cluster_count(&self) -> usize {
        1 << self.k
    }

    pub fn cluster_of(&self, index: usize) -> u32 {
        self.clusters[index]
    }

    pub fn clusters(&self) -> &[u32] {
        &self.clusters
    }

    pub fn key(&self, cluster: u32) -> &WatermarkKey {
        &self.keys[cluster as usize]
    }

    /// Entry indices in cluster `c`, ascending.
    pub fn members(&self, cluster: u32) -> &[u32] {
        let c = cluster as usize;
        &self.members[self.offsets[c]..self.offsets[c + 1]]
    }

    pub fn cluster_size(&self, cluster: u32) -> usize {
        self.members(cluster).len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Embedding store. Read-only once built; preprocessing returns a new store.
#[derive(Debug, Clone, PartialEq)]
pub struct Store {
    dim: usize,
    ids: Vec<u64>,
    vectors: Vec<f32>,
    index_of: BTreeMap<u64, usize>,
    partition: Option<Partition>,
}

impl Store {
    /// Builds an unpartitioned store, normalizing every row to unit length.
    pub fn ingest<I, V>(rows: I, dim: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, V)>,
        V: AsRef<[f64]>,
    {
        if dim == 0 {
            return Err(Error::Argument(
                "embedding dimension must be positive".into(),
            ));
        }
        let mut store = Self {
            dim,
            ids: Vec::new(),
            vectors: Vec::new(),
            index_of: BTreeMap::new(),
            partition: None,
        };
        for (id, raw) in rows {
            let raw = raw.as_ref();
            if raw.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: raw.len(),
                });
            }
            let unit = normalize(raw).ok_or(Error::DegenerateVector(id))?;
            store.push(id, &unit)?;
        }
        Ok(store)
    }

    /// Builds an unpartitioned store from vectors that are already unit
    /// norm, keeping their bits as given.
    pub fn from_unit_rows<I, V>(rows: I, dim: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, V)>,
        V: AsRef<[f32]>,
    {
        if dim == 0 {
            return Err(Error::Argument(
                "embedding dimension must be positive".into(),
            ));
        }
        let mut store = Self {
            dim,
            ids: Vec::new(),
            vectors: Vec::new(),
            index_of: BTreeMap::new(),
            partition: None,
        };
        for (id, v) in rows {
            let v = v.as_ref();
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: v.len(),
                });
            }
            let nrm = norm(v);
            if nrm.is_nan() || (nrm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnitNorm(nrm));
            }
            store.push(id, v)?;
        }
        Ok(store)
    }

    fn push(&mut self, id: u64, unit: &[f32]) -> Result<()> {
        if self.index_of.insert(id, self.ids.len()).is_some() {
            return Err(Error::DuplicateId(id));
        }
        self.ids.push(id);
        self.vectors.extend_from_slice(unit);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> u64 {
        self.ids[index]
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    pub fn embedding(&self, index: usize) -> &[f32] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn partition(&self) -> Option<&Partition> {
        self.partition.as_ref()
    }

    pub fn require_partition(&self) -> Result<&Partition> {
        self.partition.as_ref().ok_or(Error::Unpartitioned)
    }

    pub fn entry(&self, index: usize) -> StoreEntry<'_> {
        let p = self.partition.as_ref();
        let cluster = p.map(|p| p.cluster_of(index));
        StoreEntry {
            id: self.ids[index],
            embedding: self.embedding(index),
            cluster,
            key: p.zip(cluster).map(|(p, c)| p.key(c)),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = StoreEntry<'_>> + '_ {
        (0..self.len()).map(|i| self.entry(i))
    }

    /// Assigns every entry an i.i.d. uniform cluster in `[0, 2^k)` drawn
    /// in entry order from the `"partition"` stream of `seed`, and attaches
    /// the encoded cluster key.
    pub fn assign_clusters(&self, k: u32, seed: u64, spec: &PolarCodeSpec) -> Result<Self> {
        check_k(k, spec)?;
        let mut rng = substream(seed, "partition", 0);
        let count = 1u32 << k;
        let clusters = (0..self.len()).map(|_| rng.gen_range(0..count)).collect();
        self.with_clusters(k, seed, spec.clone(), clusters)
    }

    /// Attaches a previously computed partition (e.g. read from disk).
    pub fn with_clusters(
        &self,
        k: u32,
        seed: u64,
        spec: PolarCodeSpec,
        clusters: Vec<u32>,
    ) -> Result<Self> {
        check_k(k, &spec)?;
        if clusters.len() != self.len() {
            return Err(Error::Length {
                expected: self.len(),
                actual: clusters.len(),
            });
        }
        if let Some(&c) = clusters.iter().find(|&&c| c >> k != 0) {
            return Err(Error::ClusterRange {
                cluster: u64::from(c),
                k,
            });
        }
        let partition = Partition::build(k, seed, spec, clusters)?;
        Ok(Self {
            partition: Some(partition),
            ..self.clone()
        })
    }

    fn check_query(&self, q: &[f32]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: q.len(),
            });
        }
        Ok(())
    }

    pub fn scope_size(&self, scope: Scope) -> Result<usize> {
        match scope {
            Scope::Full => Ok(self.len()),
            Scope::Cluster(c) => {
                let p = self.require_partition()?;
                if c as usize >= p.cluster_count() {
                    return Err(Error::ClusterRange {
                        cluster: u64::from(c),
                        k: p.k,
                    });
                }
                Ok(p.cluster_size(c))
            }
        }
    }

    fn scope_indices(&self, scope: Scope) -> Result<ScopeIter<'_>> {
        self.scope_size(scope)?;
        Ok(match scope {
            Scope::Full => ScopeIter::Full(0..self.len()),
            Scope::Cluster(c) => ScopeIter::Members(self.require_partition()?.members(c).iter()),
        })
    }

    /// Exact top-`p` by dot product over `scope`. An empty scope yields an
    /// empty list.
    pub fn top_matches(&self, scope: Scope, q: &[f32], p: usize) -> Result<MatchList> {
        self.check_query(q)?;
        let mut top: MatchList = Vec::with_capacity(p.min(64) + 1);
        if p == 0 {
            return Ok(top);
        }
        for i in self.scope_indices(scope)? {
            let m = Match {
                id: self.ids[i],
                similarity: f64::from(dot(q, self.embedding(i))),
            };
            if top.len() == p && !m.beats(&top[p - 1]) {
                continue;
            }
            let at = top.partition_point(|t| t.beats(&m));
            top.insert(at, m);
            top.truncate(p);
        }
        Ok(top)
    }

    /// Best match over `scope`, if the scope is nonempty.
    pub fn best_match(&self, scope: Scope, q: &[f32]) -> Result<Option<Match>> {
        self.check_query(q)?;
        let mut best: Option<Match> = None;
        for i in self.scope_indices(scope)? {
            let m = Match {
                id: self.ids[i],
                similarity: f64::from(dot(q, self.embedding(i))),
            };
            if best.as_ref().is_none_or(|b| m.beats(b)) {
                best = Some(m);
            }
        }
        Ok(best)
    }

    /// Calls `visit(query_index, entry_index, similarity)` for every pair,
    /// blocking over store rows so each block is reused by all queries.
    /// Visit order is unspecified; similarities equal [`dot`].
    pub fn scan_batch<Q, F>(&self, queries: &[Q], mut visit: F) -> Result<()>
    where
        Q: AsRef<[f32]>,
        F: FnMut(usize, usize, f32),
    {
        for q in queries {
            self.check_query(q.as_ref())?;
        }
        let n = self.len();
        let mut start = 0;
        while start < n {
            let end = (start + SCAN_BLOCK_ROWS).min(n);
            let mut qi = 0;
            while qi + 4 <= queries.len() {
                let q = [
                    queries[qi].as_ref(),
                    queries[qi + 1].as_ref(),
                    queries[qi + 2].as_ref(),
                    queries[qi + 3].as_ref(),
                ];
                for i in start..end {
                    let s = dot4(q, self.embedding(i));
                    for (t, &v) in s.iter().enumerate() {
                        visit(qi + t, i, v);
                    }
                }
                qi += 4;
            }
            for (qi, q) in queries.iter().enumerate().skip(qi) {
                let q = q.as_ref();
                for i in start..end {
                    visit(qi, i, dot(q, self.embedding(i)));
                }
            }
            start = end;
        }
        Ok(())
    }

    /// Full-store best match for many queries at once. Identical to calling
    /// [`Store::best_match`] with [`Scope::Full`] per query.
    pub fn best_full_batch<Q: AsRef<[f32]>>(&self, queries: &[Q]) -> Result<Vec<Option<Match>>> {
        // (similarity, id); NaN never occurs for unit vectors
        let mut best: Vec<(f32, u64)> = alloc::vec![(f32::NEG_INFINITY, u64::MAX); queries.len()];
        let ids = &self.ids;
        self.scan_batch(queries, |qi, i, s| {
            let b = &mut best[qi];
            if s > b.0 || (s == b.0 && ids[i] < b.1) {
                *b = (s, ids[i]);
            }
        })?;
        Ok(best
            .into_iter()
            .map(|(s, id)| {
                (!self.is_empty()).then_some(Match {
                    id,
                    similarity: f64::from(s),
                })
            })
            .collect())
    }
}

fn check_k(k: u32, spec: &PolarCodeSpec) -> Result<()> {
    if k == 0 || k > MAX_CLUSTER_BITS {
        return Err(Error::ClusterBits(k));
    }
    if spec.k() != k as usize {
        return Err(Error::SpecMismatch {
            spec: spec.k(),
            requested: k,
        });
    }
    Ok(())
}

enum ScopeIter<'a> {
    Full(core::ops::Range<usize>),
    Members(core::slice::Iter<'a, u32>),
}

impl Iterator for ScopeIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            ScopeIter::Full(r) => r.next(),
            ScopeIter::Members(it) => it.next().map(|&i| i as usize),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecc::{construct_code, decode, llr_from_key};
    use alloc::vec;

    fn rows() -> Vec<(u64, Vec<f64>)> {
        vec![
            (10, vec![3.0, 4.0]),
            (11, vec![0.0, -2.0]),
            (12, vec![1.0, 0.0]),
        ]
    }

    #[test]
    fn ingest_normalizes() {
        let s = Store::ingest(rows(), 2).unwrap();
        assert_eq!(s.len(), 3);
        for i in 0..3 {
            assert!((norm(s.embedding(i)) - 1.0).abs() < 1e-6);
        }
        assert_eq!(s.embedding(0), &[0.6, 0.8]);
    }

    #[test]
    fn ingest_errors() {
        assert_eq!(
            Store::ingest(vec![(1, vec![1.0, 0.0]), (1, vec![0.0, 1.0])], 2),
            Err(Error::DuplicateId(1))
        );
        assert_eq!(
            Store::ingest(vec![(1, vec![1.0])], 2),
            Err(Error::Dimension {
                expected: 2,
                actual: 1
            })
        );
        assert_eq!(
            Store::ingest(vec![(4, vec![0.0, 0.0])], 2),
            Err(Error::DegenerateVector(4))
        );
    }

    #[test]
    fn self_match_and_ties() {
        let s = Store::ingest(
            vec![
                (5, vec![1.0, 0.0]),
                (2, vec![1.0, 0.0]),
                (9, vec![0.0, 1.0]),
            ],
            2,
        )
        .unwrap();
        let top = s.top_matches(Scope::Full, &[1.0, 0.0], 3).unwrap();
        assert_eq!(top.iter().map(|m| m.id).collect::<Vec<_>>(), vec![2, 5, 9]);
        assert!((top[0].similarity - 1.0).abs() < 1e-6);
        assert_eq!(
            s.best_match(Scope::Full, &[1.0, 0.0]).unwrap().unwrap().id,
            2
        );
        assert!(s.top_matches(Scope::Full, &[1.0], 1).is_err());
    }

    #[test]
    fn partition_rules() {
        let s = Store::ingest(rows(), 2).unwrap();
        let spec = construct_code(2, 8, 0.1).unwrap();
        assert_eq!(s.assign_clusters(0, 1, &spec), Err(Error::ClusterBits(0)));
        assert!(matches!(
            s.assign_clusters(3, 1, &spec),
            Err(Error::SpecMismatch { .. })
        ));
        let a = s.assign_clusters(2, 1, &spec).unwrap();
        assert_eq!(a, s.assign_clusters(2, 1, &spec).unwrap());
        let p = a.partition().unwrap();
        assert_eq!(p.cluster_sizes().iter().sum::<usize>(), 3);
        for e in a.entries() {
            let out = decode(
                &spec,
                &llr_from_key(&spec, e.key.unwrap(), 0.1).unwrap(),
                0.5,
            )
            .unwrap();
            assert_eq!(out.code.index(), u64::from(e.cluster.unwrap()));
        }
    }

    #[test]
    fn empty_cluster_scope_is_empty() {
        let s = Store::ingest(rows(), 2).unwrap();
        let spec = construct_code(4, 8, 0.1).unwrap();
        let a = s.assign_clusters(4, 3, &spec).unwrap();
        let p = a.partition().unwrap();
        let empty = (0..16).find(|&c| p.cluster_size(c) == 0).unwrap();
        assert!(a
            .top_matches(Scope::Cluster(empty), &[1.0, 0.0], 1)
            .unwrap()
            .is_empty());
        assert!(a.top_matches(Scope::Cluster(16), &[1.0, 0.0], 1).is_err());
    }

    #[test]
    fn blocked_kernel_is_bit_identical() {
        let rows = crate::synth::sphere_rows(300, 19, 5);
        let s = Store::ingest(rows, 19).unwrap();
        let qs: Vec<Vec<f32>> = (0..7).map(|i| s.embedding(i * 40).to_vec()).collect();
        let mut seen = 0;
        s.scan_batch(&qs, |qi, i, v| {
            assert_eq!(v.to_bits(), dot(&qs[qi], s.embedding(i)).to_bits());
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, 7 * 300);
        let batch = s.best_full_batch(&qs).unwrap();
        for (q, b) in qs.iter().zip(batch) {
            assert_eq!(b, s.best_match(Scope::Full, q).unwrap());
        }
    }

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f32> = (0..19).map(|i| i as f32).collect();
        let expect: f32 = a.iter().map(|x| x * x).sum();
        assert_eq!(dot(&a, &a), expect);
    }
}
