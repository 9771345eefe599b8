use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{binomial_stderr, ratio};
use crate::channel::flip_bits;
use crate::ecc::{encode, llr_from_key, ClusterCode, PolarCodeSpec, ScDecoder};
use crate::rng::substream;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerPoint {
    pub p_a: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub reliable: u64,
    pub reliable_errors: u64,
    pub fer: f64,
    pub fer_stderr: f64,
    pub epsilon_r: f64,
}

/// Frame-error sweep of the code alone: uniform random codes through a BSC
/// with each flip rate in `grid`.
pub fn fer_sweep(
    spec: &PolarCodeSpec,
    decoder: &ScDecoder,
    threshold: f64,
    grid: &[f64],
    frames: u64,
    seed: u64,
) -> Result<Vec<FerPoint>> {
    grid.iter()
        .enumerate()
        .map(|(i, &p_a)| {
            let mut rng = substream(seed, "ecc-bench", i as u64);
            let (mut frame_errors, mut reliable, mut reliable_errors) = (0, 0, 0);
            for _ in 0..frames {
                let code = ClusterCode::from_bits(
                    (0..spec.k()).map(|_| u8::from(rng.gen::<bool>())).collect(),
                )?;
                let key = flip_bits(&encode(spec, &code)?, p_a, &mut rng);
                let out =
                    decoder.decode(spec, &llr_from_key(spec, &key, spec.design_p())?, threshold)?;
                let wrong = out.code != code;
                frame_errors += u64::from(wrong);
                reliable += u64::from(out.reliable);
                reliable_errors += u64::from(wrong && out.reliable);
            }
            let fer = ratio(frame_errors, frames);
            Ok(FerPoint {
                p_a,
                frames,
                frame_errors,
                reliable,
                reliable_errors,
                fer,
                fer_stderr: binomial_stderr(fer, frames),
                epsilon_r: ratio(reliable_errors, reliable),
            })
        })
        .collect()
}
