mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracles::{partition, random_set, reference_dbscan};
use taxonomist_core::cluster::{check_core_soundness, dbscan, ClusterParams, Eps};

#[test]
fn fifty_random_sets_match_the_quadratic_reference() {
    for seed in 0..50 {
        let (pts, eps, min_pts) = random_set(seed);
        let params = ClusterParams { eps: Eps::Value(eps), min_pts };
        let got = dbscan(&pts, &params).unwrap();
        let expected = reference_dbscan(&pts, eps, min_pts);
        assert_eq!(partition(&got.labels), partition(&expected), "set {seed}");
        // numbering is canonical too, so labels agree exactly
        assert_eq!(got.labels, expected, "set {seed}");
        check_core_soundness(&pts, &got).unwrap();
    }
}

#[test]
fn permuting_points_preserves_the_core_partition() {
    for seed in 0..10 {
        let (pts, eps, min_pts) = random_set(seed);
        let params = ClusterParams { eps: Eps::Value(eps), min_pts };
        let base = dbscan(&pts, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let mut order: Vec<usize> = (0..pts.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let shuffled: Vec<[f64; 2]> = order.iter().map(|&i| pts[i]).collect();
        let perm = dbscan(&shuffled, &params).unwrap();
        assert_eq!(perm.cluster_count, base.cluster_count);
        // border assignment may depend on order; noise and core membership may not
        let expected = reference_dbscan(&shuffled, eps, min_pts);
        assert_eq!(perm.labels, expected);
        for (j, &i) in order.iter().enumerate() {
            assert_eq!(perm.labels[j] < 0, base.labels[i] < 0, "noise status of point {i}");
        }
    }
}
