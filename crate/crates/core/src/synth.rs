//! Synthetic embeddings: i.i.d. uniform on the unit sphere.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::substream;

/// `count` raw Gaussian rows of dimension `d` with ids `0..count`; after
/// normalization (e.g. by [`crate::store::Store::ingest`]) they are uniform
/// on the sphere.
pub fn sphere_rows(count: usize, d: usize, seed: u64) -> Vec<(u64, Vec<f64>)> {
    gaussian_rows(count, d, seed, "synth/store")
}

/// Held-out pool for out-of-dataset queries, drawn from a stream disjoint
/// from [`sphere_rows`].
pub fn holdout_pool(count: usize, d: usize, seed: u64) -> Vec<Vec<f32>> {
    gaussian_rows(count, d, seed, "synth/holdout")
        .into_iter()
        .filter_map(|(_, v)| crate::store::normalize(&v))
        .collect()
}

fn gaussian_rows(count: usize, d: usize, seed: u64, label: &str) -> Vec<(u64, Vec<f64>)> {
    let mut rng = substream(seed, label, 0);
    (0..count as u64)
        .map(|id| (id, (0..d).map(|_| rng.sample(StandardNormal)).collect()))
        .collect()
}
