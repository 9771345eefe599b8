use drew_core::ecc::{
    capacity_rate, construct_code, decode, encode, llr_from_key, CheckNode, ClusterCode,
    PolarCodeSpec, ReliabilityMode, ScDecoder, KNOWN_BIT_LLR,
};
use drew_core::eval::fer_sweep;
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = PolarCodeSpec> {
    (1usize..=64, 0.01f64..0.49)
        .prop_flat_map(|(n, p)| (1usize..=n, Just(n), Just(p)))
        .prop_map(|(k, n, p)| construct_code(k, n, p).unwrap())
}

fn code_for(spec: &PolarCodeSpec, seed: u64) -> ClusterCode {
    let bits = (0..spec.k())
        .map(|i| ((seed.rotate_left(i as u32 * 7) ^ (seed >> (i % 64))) & 1) as u8)
        .collect();
    ClusterCode::from_bits(bits).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn roundtrip_and_linearity(spec in spec_strategy(), a in any::<u64>(), b in any::<u64>()) {
        let (ca, cb) = (code_for(&spec, a), code_for(&spec, b));
        let (wa, wb) = (encode(&spec, &ca).unwrap(), encode(&spec, &cb).unwrap());
        prop_assert_eq!(wa.len(), spec.n());
        prop_assert_eq!(encode(&spec, &ca.xor(&cb).unwrap()).unwrap(), wa.xor(&wb).unwrap());
        let soft = decode(&spec, &llr_from_key(&spec, &wa, spec.design_p()).unwrap(), 0.0).unwrap();
        prop_assert_eq!(&soft.code, &ca);
        // Noiseless channel: every position carries the known-bit magnitude.
        let mut hard = vec![KNOWN_BIT_LLR; spec.block_len()];
        for (l, &bit) in hard.iter_mut().zip(wa.bits()) {
            if bit == 1 {
                *l = -KNOWN_BIT_LLR;
            }
        }
        let out = decode(&spec, &hard, KNOWN_BIT_LLR / 2.0).unwrap();
        prop_assert_eq!(&out.code, &ca);
        prop_assert!(out.reliable);
    }

    #[test]
    fn raising_the_threshold_never_makes_a_decode_reliable(
        llrs in proptest::collection::vec(-8.0f64..8.0, 128),
        t1 in 0.0f64..10.0,
        dt in 0.0f64..10.0,
        min_bit in any::<bool>(),
    ) {
        let spec = construct_code(10, 100, 0.1).unwrap();
        let mode = if min_bit { ReliabilityMode::MinBit } else { ReliabilityMode::LastBit };
        let dec = ScDecoder::new(CheckNode::Exact, mode);
        let low = dec.decode(&spec, &llrs, t1).unwrap();
        let high = dec.decode(&spec, &llrs, t1 + dt).unwrap();
        prop_assert_eq!(&low.code, &high.code);
        prop_assert!(!high.reliable || low.reliable);
        prop_assert_eq!(low.reliable, low.reliability_score >= t1);
    }
}

#[test]
fn noiseless_roundtrip_holds_up_to_the_known_bit_constant() {
    let spec = construct_code(10, 100, 0.1).unwrap();
    for i in [0u64, 1, 511, 1023] {
        let c = ClusterCode::from_index(i, 10).unwrap();
        let llrs = llr_from_key(&spec, &encode(&spec, &c).unwrap(), 0.1).unwrap();
        let out = decode(&spec, &llrs, 2.0).unwrap();
        assert_eq!(out.code, c);
        assert!(out.reliable);
        assert!(out.reliability_score <= KNOWN_BIT_LLR * 128.0);
    }
}

#[test]
fn frame_error_rate_grows_with_flip_rate() {
    let spec = construct_code(10, 100, 0.1).unwrap();
    let grid = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35];
    let pts = fer_sweep(&spec, &ScDecoder::default(), 0.5, &grid, 10_000, 3).unwrap();
    assert_eq!(pts[0].frame_errors, 0);
    for w in pts.windows(2) {
        let band = 2.0 * w[0].fer_stderr.hypot(w[1].fer_stderr);
        assert!(w[1].fer >= w[0].fer - band, "{} -> {}", w[0].fer, w[1].fer);
    }
    assert!(pts.last().unwrap().fer > 0.5);
}

#[test]
fn capacity_is_strictly_decreasing() {
    let grid: Vec<f64> = (0..=1000).map(|i| 0.5 * f64::from(i) / 1000.0).collect();
    for w in grid.windows(2) {
        assert!(capacity_rate(w[1]) < capacity_rate(w[0]), "at {}", w[1]);
    }
}
