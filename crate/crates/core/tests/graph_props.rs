mod common;

use proptest::prelude::*;
use tlink::graph::{chronological_split, inductive_mask, khop_neighborhood, parse_edge_list, NegativeSampler, TemporalEdge};

use common::random_stream;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_segments_concatenate_to_the_stream(seed in 0u64..1000, len in 10usize..300, tf in 0.1f64..0.7, vf in 0.05f64..0.25) {
        let ds = random_stream(20, len, seed);
        let plan = chronological_split(&ds, tf, vf).unwrap();
        let joined: Vec<TemporalEdge> = [plan.train(&ds), plan.val(&ds), plan.test(&ds)].concat();
        prop_assert_eq!(joined, ds.edges.clone());
    }

    #[test]
    fn masked_nodes_never_reach_training(seed in 0u64..1000, p in 0.01f64..0.9) {
        let ds = random_stream(40, 300, seed);
        let plan = inductive_mask(&ds, &chronological_split(&ds, 0.7, 0.15).unwrap(), p, seed);
        for e in plan.training_stream(&ds) {
            prop_assert!(!plan.masked_nodes.contains(&e.src) && !plan.masked_nodes.contains(&e.dst));
        }
        for e in plan.inductive_test_edges(&ds) {
            prop_assert!(plan.is_masked_edge(&e));
        }
    }

    #[test]
    fn neighborhoods_grow_with_time(seed in 0u64..1000, k in 1usize..4, v in 1u32..15) {
        let ds = random_stream(15, 60, seed);
        let mut prev = khop_neighborhood(&ds, v, 0.0, k);
        for t in (5..=65).step_by(5) {
            let cur = khop_neighborhood(&ds, v, t as f64, k);
            prop_assert!(prev.is_subset(&cur));
            prev = cur;
        }
    }

    #[test]
    fn edge_list_text_round_trip(seed in 0u64..1000) {
        let ds = random_stream(12, 50, seed);
        let back = parse_edge_list(&ds.edge_list_string()).unwrap();
        prop_assert_eq!(back.edges.len(), ds.edges.len());
        for (a, b) in back.edges.iter().zip(&ds.edges) {
            prop_assert_eq!(back.original_ids[a.src as usize], b.src as u64);
            prop_assert_eq!(back.original_ids[a.dst as usize], b.dst as u64);
            prop_assert_eq!(a.t, b.t);
        }
    }
}

#[test]
fn negative_draws_are_uniform() {
    let universe: Vec<u32> = (1..=1000).collect();
    let sampler = NegativeSampler::new(universe, 99);
    let batch = vec![TemporalEdge::new(1, 2, 0.0); 1000];
    let mut counts = vec![0usize; 1001];
    for b in 0..100 {
        for n in sampler.for_batch(b * 1000, &batch) {
            counts[n as usize] += 1;
        }
    }
    // expected 100 per id, binomial sd just under 10
    let sd = (100_000.0_f64 * (1.0 / 1000.0) * (1.0 - 1.0 / 1000.0)).sqrt();
    for &c in &counts[1..] {
        assert!((c as f64 - 100.0).abs() <= 5.0 * sd, "{c}");
    }
    let chi2: f64 = counts[1..].iter().map(|&c| (c as f64 - 100.0).powi(2) / 100.0).sum();
    // 999 degrees of freedom; mean 999, sd about 45
    assert!(chi2 < 999.0 + 5.0 * 45.0, "{chi2}");
}

#[test]
fn sampler_depends_only_on_position() {
    let sampler = NegativeSampler::new((1..=50).collect(), 3);
    let batch = vec![TemporalEdge::new(1, 2, 0.0); 10];
    assert_eq!(sampler.for_batch(40, &batch), sampler.for_batch(40, &batch));
    assert_ne!(sampler.for_batch(40, &batch), sampler.for_batch(50, &batch));
}
