//! Cache throughput and memory measurements.

use std::time::Instant;

use serde::Serialize;

use super::synth::{triadic, TriadicParams};
use crate::error::Result;
use crate::graph::NodeId;
use crate::joint::build_joint_batch;
use crate::ncache::{CacheConfig, NCacheStore};
use crate::neural::{Model, ModelConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BenchRecord {
    Memory {
        d0: usize,
        m1: usize,
        m2: usize,
        f: usize,
        k: usize,
        /// Measured from the allocated arrays.
        scalars_per_node: usize,
    },
    Throughput {
        batch_size: usize,
        events: usize,
        events_per_sec: f64,
        links: usize,
        links_per_sec: f64,
    },
}

impl BenchRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Per-node footprint of a freshly allocated store.
pub fn memory_record(cfg: &CacheConfig) -> Result<BenchRecord> {
    let store = NCacheStore::new(*cfg, 16)?;
    Ok(BenchRecord::Memory {
        d0: cfg.d0,
        m1: cfg.capacity(1),
        m2: cfg.capacity(2),
        f: cfg.f,
        k: cfg.k,
        scalars_per_node: store.allocated_scalars_per_node(),
    })
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub events: usize,
    pub batch_sizes: Vec<usize>,
    pub seed: u64,
}

/// Memory record followed by one throughput record per batch size: events
/// per second through `apply_batch` over a synthetic stream, and links per
/// second through `build_joint_batch` on the warmed caches.
pub fn run_bench(model_cfg: ModelConfig, opts: &BenchOptions) -> Result<Vec<BenchRecord>> {
    let stream = triadic(&TriadicParams {
        events: opts.events,
        seed: opts.seed,
        ..Default::default()
    })?;
    let ds = &stream.dataset;
    let model = Model::new(model_cfg, opts.seed)?;
    let mut out = vec![memory_record(&model.cache_config())?];
    let links: Vec<(NodeId, NodeId)> = ds.edges.iter().map(|e| (e.src, e.dst)).collect();
    for &bs in &opts.batch_sizes {
        let bs = bs.max(1);
        let mut store = model.new_store(ds.num_nodes)?;
        let t0 = Instant::now();
        store.replay(&ds.edges, bs, &model)?;
        let ev_secs = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let mut n_links = 0;
        for chunk in links.chunks(bs) {
            n_links += build_joint_batch(&store, chunk, &model).len();
        }
        let link_secs = t1.elapsed().as_secs_f64();
        out.push(BenchRecord::Throughput {
            batch_size: bs,
            events: ds.edges.len(),
            events_per_sec: ds.edges.len() as f64 / ev_secs.max(1e-9),
            links: n_links,
            links_per_sec: n_links as f64 / link_secs.max(1e-9),
        });
    }
    Ok(out)
}
