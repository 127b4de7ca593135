mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use semmap::retrieval::{
    map_at_r, precision_at_k, precision_at_r, run_benchmark, score_query, BenchmarkConfig, LabeledPool,
};

/// Labels drawn from up to four classes, every class with at least two rows.
fn random_labels(r: &mut impl Rng, n: usize) -> Vec<String> {
    let classes = r.random_range(2..=4);
    loop {
        let labels: Vec<String> = (0..n).map(|_| format!("j{}", r.random_range(0..classes))).collect();
        let ok = (0..classes).all(|c| labels.iter().filter(|l| **l == format!("j{c}")).count() != 1);
        if ok {
            return labels;
        }
    }
}

fn random_pool(seed: u64) -> (Array2<f32>, Vec<String>) {
    let mut r = rng(seed);
    let n = r.random_range(10..=500);
    let d = r.random_range(1..=20);
    let v = if r.random_bool(0.3) {
        // coarse grid: lots of exactly tied distances
        Array2::from_shape_simple_fn((n, d), || r.random_range(-1..2) as f32)
    } else {
        gaussian(&mut r, n, d, 1.0)
    };
    let labels = random_labels(&mut r, n);
    (v, labels)
}

#[test]
fn scores_equal_full_sort_oracle() {
    for seed in 0..50 {
        let (v, labels) = random_pool(seed);
        let n = v.nrows();
        let pool = LabeledPool::from_labels(v.clone(), labels.clone()).unwrap();
        let mut r = rng(seed + 1000);
        for _ in 0..20 {
            let q = r.random_range(0..n);
            let ranking = oracle_ranking(&v, q);
            let k = r.random_range(1..n);
            let want_k = oracle_precision(&labels, &ranking, q, k);
            let want_r = oracle_precision(&labels, &ranking, q, oracle_r(&labels, q));
            let want_map = oracle_map_at_r(&labels, &ranking, q);

            assert_eq!(precision_at_k(&pool, q, k).unwrap(), want_k);
            assert_eq!(precision_at_r(&pool, q).unwrap(), want_r);
            assert_eq!(map_at_r(&pool, q).unwrap(), want_map);
            let s = score_query(&pool, q, k).unwrap();
            assert_eq!((s.precision_at_k, s.precision_at_r, s.map_at_r), (want_k, want_r, want_map));
        }
    }
}

#[test]
fn singleton_label_has_no_r() {
    let v = Array2::from_shape_vec((3, 1), vec![0.0f32, 1.0, 2.0]).unwrap();
    let pool = LabeledPool::from_labels(v, vec!["a".into(), "a".into(), "b".into()]).unwrap();
    assert!(precision_at_r(&pool, 2).is_err());
    assert_eq!(precision_at_r(&pool, 0).unwrap(), 1.0);
}

#[test]
fn benchmark_is_seeded_and_thread_independent() {
    let (v, labels) = two_clusters(5, 150, 10, 3.0);
    let pool = LabeledPool::from_labels(v, labels).unwrap();
    let config = BenchmarkConfig {
        k: 50,
        n_queries: 120,
        seed: 9,
    };
    let a = run_benchmark(&pool, "x", &config).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = single.install(|| run_benchmark(&pool, "x", &config).unwrap());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.per_label.values().map(|m| m.n_queries).sum::<usize>(), 120);

    let other = run_benchmark(&pool, "x", &BenchmarkConfig { seed: 10, ..config.clone() }).unwrap();
    assert_ne!(a, other);
    assert!(run_benchmark(&pool, "x", &BenchmarkConfig { n_queries: 301, ..config }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn invariant_under_rigid_motion_and_scaling(seed in any::<u64>(), scale in 0.5f32..4.0) {
        let (v, labels) = two_clusters(seed, 30, 4, 1.0);
        // axis permutation with sign flips, uniform scaling and a shift keep
        // the ranking, up to rounding of near ties
        let moved = Array2::from_shape_fn(v.dim(), |(i, j)| {
            let src = (j + 1) % 4;
            let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
            sign * v[[i, src]] * scale + 7.0
        });
        let a = LabeledPool::from_labels(v, labels.clone()).unwrap();
        let b = LabeledPool::from_labels(moved, labels).unwrap();
        for q in [0, 17, 45] {
            let sa = score_query(&a, q, 10).unwrap();
            let sb = score_query(&b, q, 10).unwrap();
            prop_assert!((sa.precision_at_r - sb.precision_at_r).abs() <= 1.0 / 29.0);
            prop_assert!((sa.map_at_r - sb.map_at_r).abs() <= 0.05);
        }
    }

    #[test]
    fn scores_are_probabilities(seed in 0u64..10_000) {
        let (v, labels) = random_pool(seed);
        let pool = LabeledPool::from_labels(v, labels).unwrap();
        let s = score_query(&pool, 0, 1).unwrap();
        for x in [s.precision_at_k, s.precision_at_r, s.map_at_r] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert_eq!(s.map_at_r == 0.0, s.precision_at_r == 0.0);
    }

    #[test]
    fn relabeling_a_neighbor_as_relevant_never_lowers_precision(seed in 0u64..10_000) {
        let (v, mut labels) = random_pool(seed);
        let before = LabeledPool::from_labels(v.clone(), labels.clone()).unwrap();
        let ranking = oracle_ranking(&v, 0);
        let k = 5.min(ranking.len());
        let p0 = precision_at_k(&before, 0, k).unwrap();
        if let Some(&i) = ranking[..k].iter().find(|&&i| labels[i] != labels[0]) {
            let old = labels[i].clone();
            labels[i] = labels[0].clone();
            // keep every class at zero or at least two members
            if labels.iter().filter(|l| **l == old).count() == 1 {
                return Ok(());
            }
            let after = LabeledPool::from_labels(v, labels).unwrap();
            prop_assert!(precision_at_k(&after, 0, k).unwrap() > p0);
        }
    }
}
