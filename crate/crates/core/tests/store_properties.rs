use drew_core::ecc::{construct_code, decode, encode, llr_from_key, ClusterCode};
use drew_core::store::{dot, Scope, Store};
use drew_core::synth::{holdout_pool, sphere_rows};
use proptest::prelude::*;

#[test]
fn balls_in_bins_over_100_seeds() {
    let spec = construct_code(10, 100, 0.1).unwrap();
    let raw = Store::ingest(sphere_rows(2048, 4, 1), 4).unwrap();
    for seed in 0..100 {
        let s = raw.assign_clusters(10, seed, &spec).unwrap();
        let p = s.partition().unwrap();
        assert!(p.clusters().iter().all(|&c| c < 1024));
        let sizes = p.cluster_sizes();
        assert_eq!(sizes.iter().sum::<usize>(), 2048);
        let max = *sizes.iter().max().unwrap();
        assert!(max <= 15, "seed {seed}: max cluster size {max}");
        let mut seen = vec![false; 2048];
        for c in 0..1024 {
            for &m in p.members(c) {
                assert!(!seen[m as usize]);
                seen[m as usize] = true;
                assert_eq!(p.cluster_of(m as usize), c);
            }
        }
        assert!(seen.iter().all(|&x| x));
    }
}

#[test]
fn every_key_decodes_to_its_cluster() {
    let spec = construct_code(10, 100, 0.1).unwrap();
    let s = Store::ingest(sphere_rows(3000, 8, 4), 8)
        .unwrap()
        .assign_clusters(10, 4, &spec)
        .unwrap();
    for e in s.entries() {
        let c = ClusterCode::from_index(u64::from(e.cluster.unwrap()), 10).unwrap();
        assert_eq!(e.key.unwrap(), &encode(&spec, &c).unwrap());
        let out = decode(
            &spec,
            &llr_from_key(&spec, e.key.unwrap(), 0.1).unwrap(),
            0.5,
        )
        .unwrap();
        assert_eq!(out.code, c);
    }
}

fn partitioned(n: usize, d: usize, seed: u64) -> Store {
    let spec = construct_code(4, 16, 0.1).unwrap();
    Store::ingest(sphere_rows(n, d, seed), d)
        .unwrap()
        .assign_clusters(4, seed, &spec)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cluster_scope_never_beats_full(seed in 0u64..1000, n in 1usize..300, d in 1usize..24) {
        let s = partitioned(n, d, seed);
        let q = &holdout_pool(1, d, seed)[0];
        let full_best = s.best_match(Scope::Full, q).unwrap().unwrap();
        let p = s.partition().unwrap();
        for c in 0..16 {
            match s.best_match(Scope::Cluster(c), q).unwrap() {
                None => prop_assert_eq!(p.cluster_size(c), 0),
                Some(m) => {
                    prop_assert!(m.similarity <= full_best.similarity);
                    let attains_max = p.members(c).iter().any(|&i| f64::from(dot(s.embedding(i as usize), q)) == full_best.similarity);
                    prop_assert_eq!(m.similarity == full_best.similarity, attains_max);
                    if p.cluster_of(s.index_of(full_best.id).unwrap()) == c {
                        prop_assert_eq!(m, full_best);
                    }
                }
            }
        }
    }

    #[test]
    fn top_matches_are_sorted_prefixes(seed in 0u64..1000, p in 1usize..40) {
        let s = partitioned(200, 6, seed);
        let q = &holdout_pool(1, 6, seed + 1)[0];
        let all = s.top_matches(Scope::Full, q, s.len()).unwrap();
        let top = s.top_matches(Scope::Full, q, p).unwrap();
        prop_assert_eq!(&all[..p.min(all.len())], &top[..]);
        for w in all.windows(2) {
            prop_assert!(w[0].similarity > w[1].similarity || (w[0].similarity == w[1].similarity && w[0].id < w[1].id));
        }
    }
}
