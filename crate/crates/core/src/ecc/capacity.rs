/// `H(p) = -p log2 p - (1-p) log2 (1-p)`, with `H(0) = H(1) = 0`.
///
/// Panics if `p` is outside `[0, 1]`.
pub fn binary_entropy(p: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&p),
        "binary_entropy: p={p} outside [0, 1]"
    );
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    -(p * libm::log2(p) + (1.0 - p) * libm::log2(1.0 - p))
}

/// Largest code rate decodable w.h.p. over a BSC with flip rate `p_a`:
/// `1 - H(p_a)`. Panics if `p_a` is outside `[0, 0.5]`.
pub fn capacity_rate(p_a: f64) -> f64 {
    assert!(
        (0.0..=0.5).contains(&p_a),
        "capacity_rate: p_a={p_a} outside [0, 0.5]"
    );
    1.0 - binary_entropy(p_a)
}

/// Largest flip rate in `[0, 0.5]` a code of the given rate can tolerate,
/// i.e. the root of `1 - H(p) = rate`. Safeguarded Newton iteration.
pub fn flip_rate_limit(rate: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&rate),
        "flip_rate_limit: rate={rate} outside [0, 1]"
    );
    if rate >= 1.0 {
        return 0.0;
    }
    if rate <= 0.0 {
        return 0.5;
    }
    let target = 1.0 - rate;
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    let mut p = 0.25;
    for _ in 0..200 {
        let h = binary_entropy(p) - target;
        if h.abs() < 1e-15 {
            break;
        }
        if h > 0.0 {
            hi = p;
        } else {
            lo = p;
        }
        let slope = libm::log2((1.0 - p) / p);
        let next = p - h / slope;
        p = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_reference_points() {
        assert_eq!(binary_entropy(0.5), 1.0);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.1) - 0.4690).abs() < 1e-4);
    }

    #[test]
    fn capacity_reference_points() {
        assert_eq!(capacity_rate(0.0), 1.0);
        assert_eq!(capacity_rate(0.5), 0.0);
        assert!((capacity_rate(0.1) - 0.5310).abs() < 1e-4);
    }

    #[test]
    fn limit_inverts_capacity() {
        for rate in [0.05, 0.1, 0.25, 0.5, 0.9] {
            let p = flip_rate_limit(rate);
            assert!((capacity_rate(p) - rate).abs() < 1e-12);
        }
        assert_eq!(flip_rate_limit(1.0), 0.0);
        assert_eq!(flip_rate_limit(0.0), 0.5);
    }

    #[test]
    #[should_panic]
    fn entropy_rejects_out_of_domain() {
        binary_entropy(1.5);
    }
}
