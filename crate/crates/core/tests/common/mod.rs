#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlink::graph::{Dataset, NodeId, TemporalEdge};
use tlink::ncache::CacheConfig;
use tlink::neural::{Model, ModelConfig};

/// Random stream over nodes `1..=n` with strictly increasing timestamps.
pub fn random_stream(n: u32, len: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = (0..len)
        .map(|i| {
            let u = rng.gen_range(1..=n);
            let mut v = rng.gen_range(1..=n);
            if v == u {
                v = 1 + u % n;
            }
            TemporalEdge::new(u, v, i as f64 + 1.0)
        })
        .collect();
    Dataset::from_edges(edges, n as usize).unwrap()
}

pub fn small_model(m1: usize, m2: usize, alpha: f64, seed: u64) -> Model {
    let cfg = ModelConfig {
        cache: CacheConfig { m1, m2, f: 3, d0: 5, alpha, seed, ..Default::default() },
        d_t: 4,
        hidden: 6,
        ..Default::default()
    };
    Model::new(cfg, seed).unwrap()
}

pub fn links(ds: &Dataset, count: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ds.num_nodes as NodeId;
    (0..count).map(|_| (rng.gen_range(1..=n), rng.gen_range(1..=n))).collect()
}
