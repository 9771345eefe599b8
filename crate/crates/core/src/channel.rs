//! Attack model: each watermark bit flips independently with probability
//! `p_A`, and the content embedding drifts by isotropic Gaussian noise of
//! scale `sigma` before renormalization.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ecc::WatermarkKey;
use crate::rng::{substream, SimRng};
use crate::store::{norm, StoreEntry, UNIT_NORM_TOL};
use crate::{Error, Result};

/// One named augmentation, reduced to its channel parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AttackDocument")]
pub struct AttackConfig {
    pub name: String,
    #[serde(rename = "p_A")]
    pub p_a: f64,
    pub sigma: f64,
    #[serde(default)]
    pub out_of_dataset: bool,
}

#[derive(Deserialize)]
struct AttackDocument {
    name: String,
    #[serde(rename = "p_A")]
    p_a: f64,
    sigma: f64,
    #[serde(default)]
    out_of_dataset: bool,
}

impl TryFrom<AttackDocument> for AttackConfig {
    type Error = Error;

    fn try_from(d: AttackDocument) -> Result<Self> {
        Self::new(d.name, d.p_a, d.sigma, d.out_of_dataset)
    }
}

impl AttackConfig {
    pub fn new(
        name: impl Into<String>,
        p_a: f64,
        sigma: f64,
        out_of_dataset: bool,
    ) -> Result<Self> {
        let name = name.into();
        if !(0.0..=0.5).contains(&p_a) {
            return Err(Error::Attack {
                name,
                reason: alloc::format!("p_A={p_a} outside [0, 0.5]"),
            });
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Attack {
                name,
                reason: alloc::format!("sigma={sigma} must be finite and >= 0"),
            });
        }
        Ok(Self {
            name,
            p_a,
            sigma,
            out_of_dataset,
        })
    }

    pub fn identity() -> Self {
        Self {
            name: "no_aug".into(),
            p_a: 0.0,
            sigma: 0.0,
            out_of_dataset: false,
        }
    }
}

/// What the retrieval side observes for one piece of content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub observed_key: WatermarkKey,
    pub observed_embedding: Vec<f32>,
    pub ground_truth_id: Option<u64>,
}

/// Independent noise streams for the key and the embedding.
#[derive(Debug, Clone)]
pub struct ChannelRngs {
    pub key: SimRng,
    pub embedding: SimRng,
}

impl ChannelRngs {
    pub fn new(seed: u64, index: u64) -> Self {
        Self {
            key: substream(seed, "channel/key", index),
            embedding: substream(seed, "channel/embedding", index),
        }
    }
}

/// Flips each bit independently with probability `p_a`. Always consumes
/// exactly one uniform draw per bit.
pub fn flip_bits<R: Rng + ?Sized>(key: &WatermarkKey, p_a: f64, rng: &mut R) -> WatermarkKey {
    assert!(
        (0.0..=1.0).contains(&p_a),
        "flip_bits: p_a={p_a} outside [0, 1]"
    );
    let bits = key
        .bits()
        .iter()
        .map(|&b| {
            let u: f64 = rng.gen();
            if u < p_a {
                b ^ 1
            } else {
                b
            }
        })
        .collect();
    WatermarkKey::from_bits(bits).expect("flipping preserves binary values")
}

/// Uniformly random key of length `n`, the reading of unwatermarked content.
pub fn random_key<R: Rng + ?Sized>(n: usize, rng: &mut R) -> WatermarkKey {
    WatermarkKey::from_bits((0..n).map(|_| u8::from(rng.gen::<bool>())).collect()).expect("binary")
}

/// Returns `normalize(e + sigma * g)` with `g ~ N(0, I)`. Always consumes
/// `d` normal draws per attempt; `sigma = 0` returns `e` unchanged.
pub fn perturb_embedding<R: Rng + ?Sized>(e: &[f32], sigma: f64, rng: &mut R) -> Result<Vec<f32>> {
    let n = norm(e);
    if n.is_nan() || (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NotUnitNorm(n));
    }
    for _ in 0..2 {
        let noisy: Vec<f64> = e
            .iter()
            .map(|&x| {
                let g: f64 = rng.sample(StandardNormal);
                f64::from(x) + sigma * g
            })
            .collect();
        if sigma == 0.0 {
            return Ok(e.to_vec());
        }
        if let Some(v) = crate::store::normalize(&noisy) {
            return Ok(v);
        }
    }
    Err(Error::DegenerateNoise)
}

/// Produces the query an attack makes of `entry`. For out-of-dataset
/// attacks the embedding comes from `holdout` and the key is uniform noise.
pub fn apply_attack(
    entry: &StoreEntry<'_>,
    attack: &AttackConfig,
    holdout: Option<&[f32]>,
    rngs: &mut ChannelRngs,
) -> Result<Query> {
    let key = entry.key.ok_or(Error::Unpartitioned)?;
    if attack.out_of_dataset {
        let fresh = holdout.ok_or(Error::MissingHoldout)?;
        return Ok(Query {
            observed_key: random_key(key.len(), &mut rngs.key),
            observed_embedding: perturb_embedding(fresh, attack.sigma, &mut rngs.embedding)?,
            ground_truth_id: None,
        });
    }
    Ok(Query {
        observed_key: flip_bits(key, attack.p_a, &mut rngs.key),
        observed_embedding: perturb_embedding(entry.embedding, attack.sigma, &mut rngs.embedding)?,
        ground_truth_id: Some(entry.id),
    })
}
