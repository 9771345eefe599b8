use alloc::vec::Vec;

use rand::Rng;

use crate::channel::{apply_attack, AttackConfig, ChannelRngs, Query};
use crate::rng::substream;
use crate::store::Store;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SampledQuery {
    /// Entry the query was derived from (also for out-of-dataset queries,
    /// whose key length it supplies).
    pub source: usize,
    pub query: Query,
}

/// Draws `count` entries uniformly with replacement and pushes each through
/// `attack`. `stream` separates independent runs under one seed.
pub fn sample_queries(
    store: &Store,
    attack: &AttackConfig,
    holdout: &[Vec<f32>],
    count: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<SampledQuery>> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    store.require_partition()?;
    if attack.out_of_dataset && holdout.is_empty() {
        return Err(Error::MissingHoldout);
    }
    let mut pick = substream(seed, "eval/sample", stream);
    let mut rngs = ChannelRngs::new(seed, stream);
    (0..count)
        .map(|_| {
            let source = pick.gen_range(0..store.len());
            let fresh = if attack.out_of_dataset {
                Some(holdout[pick.gen_range(0..holdout.len())].as_slice())
            } else {
                None
            };
            let query = apply_attack(&store.entry(source), attack, fresh, &mut rngs)?;
            Ok(SampledQuery { source, query })
        })
        .collect()
}
