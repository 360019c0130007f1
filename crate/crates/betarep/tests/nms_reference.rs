//! Greedy NMS against an independent O(n^2) reference, prefilter soundness,
//! and thread-count determinism.

mod common;

use common::{random_paired, random_scene, reference_nms, reference_overlaps};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use betarep::{
    boxes_to_beta, greedy_nms, pairwise_prefilter, Detection, GridSpec, NmsConfig, Strategy,
    WeightConfig,
};

fn test_config(strategy: Strategy) -> NmsConfig {
    NmsConfig {
        strategy,
        // The schedule equivalence holds at any valid grid; a coarse grid
        // keeps a thousand scenes fast.
        grid: GridSpec {
            resolution: 32,
            ..GridSpec::default()
        },
        ..NmsConfig::default()
    }
}

#[test]
fn greedy_matches_reference_on_iou_strategies() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for round in 0..1000 {
        let clusters = rng.gen_range(1..5);
        let dups = rng.gen_range(1..=4);
        let dets = random_scene(&mut rng, clusters, dups);
        assert!(dets.len() <= 20);
        for strategy in [Strategy::Fiou, Strategy::Viou, Strategy::FiouViou] {
            let cfg = test_config(strategy);
            let got = greedy_nms(&dets, &cfg).unwrap();
            let expected = reference_nms(&dets, &cfg);
            assert_eq!(got, expected, "round {round}, strategy {strategy:?}");
        }
    }
}

#[test]
fn greedy_matches_reference_on_beta_strategy() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..1000 {
        let clusters = rng.gen_range(1..4);
        let dups = rng.gen_range(1..=4);
        let dets = random_scene(&mut rng, clusters, dups);
        let cfg = test_config(Strategy::Beta);
        let got = greedy_nms(&dets, &cfg).unwrap();
        let expected = reference_nms(&dets, &cfg);
        assert_eq!(got, expected, "round {round}");
    }
}

#[test]
fn prefilter_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let weights = WeightConfig::default();
    for _ in 0..1000 {
        let n = rng.gen_range(0..25);
        let dets: Vec<Detection> = (0..n)
            .map(|i| {
                let paired = random_paired(&mut rng, 0.2);
                Detection::new(
                    boxes_to_beta(&paired, &weights).unwrap(),
                    rng.gen_range(0.01..1.0),
                    i,
                )
                .unwrap()
            })
            .collect();
        let boxes: Vec<_> = dets.iter().map(|d| d.pedestrian.boundary).collect();
        assert_eq!(pairwise_prefilter(&dets), reference_overlaps(&boxes));
    }
}

#[test]
fn beta_nms_deterministic_across_thread_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let dets = random_scene(&mut rng, 6, 8);
    let cfg = test_config(Strategy::Beta);
    let mut outputs = Vec::new();
    for threads in [1usize, 4, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        outputs.push(pool.install(|| greedy_nms(&dets, &cfg).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn scene_translation_scaling_preserves_beta_kept_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let dets = random_scene(&mut rng, 4, 5);
    let cfg = test_config(Strategy::Beta);
    let base_ids: Vec<u64> = greedy_nms(&dets, &cfg)
        .unwrap()
        .iter()
        .map(|d| d.id)
        .collect();
    for (dx, dy, s) in [(500.0, -200.0, 1.0), (0.0, 0.0, 3.5), (-80.0, 40.0, 0.25)] {
        let moved: Vec<Detection> = dets
            .iter()
            .map(|d| {
                let mut p = d.pedestrian;
                p.boundary = p.boundary.scaled(s).translated(dx, dy);
                Detection::new(p, d.score, d.id).unwrap()
            })
            .collect();
        let ids: Vec<u64> = greedy_nms(&moved, &cfg)
            .unwrap()
            .iter()
            .map(|d| d.id)
            .collect();
        assert_eq!(ids, base_ids, "kept set changed under ({dx}, {dy}, x{s})");
    }
}
