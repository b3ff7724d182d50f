//! Synthetic streams where the only thing that predicts a link is shared
//! neighborhood structure.

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Dataset, NodeId, TemporalEdge};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriadicParams {
    pub events: usize,
    /// Node pool size; `0` picks `max(10, events / 2)`.
    pub nodes: usize,
    /// Share of events that close a recent open wedge.
    pub closure_frac: f64,
    /// How many recent edges wedges are drawn from.
    pub window: usize,
    pub seed: u64,
}

impl Default for TriadicParams {
    fn default() -> Self {
        Self {
            events: 2000,
            nodes: 0,
            closure_frac: 0.8,
            window: 200,
            seed: 0,
        }
    }
}

/// A generated stream and, per edge, whether it closed a wedge.
#[derive(Debug, Clone)]
pub struct SynthStream {
    pub dataset: Dataset,
    pub closures: Vec<bool>,
}

fn check_size(n: usize) -> Result<()> {
    if n < 10 {
        return Err(Error::Config(format!("synthetic streams need at least 10 events (got {n})")));
    }
    Ok(())
}

/// Growth process: most events pick a recent edge `a - v`, a neighbor `u`
/// of `a` not yet linked to `v`, and emit `(u, v)`; the rest are uniform
/// random pairs. Timestamps are event indices.
pub fn triadic(p: &TriadicParams) -> Result<SynthStream> {
    check_size(p.events)?;
    let n = if p.nodes == 0 { (p.events / 2).max(10) } else { p.nodes };
    if n < 3 {
        return Err(Error::Config("triadic streams need at least 3 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n + 1];
    let mut linked: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut recent: VecDeque<(NodeId, NodeId)> = VecDeque::new();
    let warmup = p.events / 10;
    let mut edges = Vec::with_capacity(p.events);
    let mut closures = Vec::with_capacity(p.events);

    let key = |a: NodeId, b: NodeId| (a.min(b), a.max(b));
    for i in 0..p.events {
        let mut pick = None;
        if i >= warmup && rng.gen::<f64>() < p.closure_frac {
            for _ in 0..32 {
                let (x, y) = recent[rng.gen_range(0..recent.len())];
                let (a, v) = if rng.gen::<bool>() { (x, y) } else { (y, x) };
                let nbrs = &adj[a as usize];
                let u = nbrs[rng.gen_range(0..nbrs.len())];
                if u != v && !linked.contains(&key(u, v)) {
                    pick = Some((u, v, true));
                    break;
                }
            }
        }
        let (u, v, closed) = pick.unwrap_or_else(|| loop {
            let u = rng.gen_range(1..=n as NodeId);
            let v = rng.gen_range(1..=n as NodeId);
            if u != v {
                break (u, v, false);
            }
        });
        let (src, dst) = if rng.gen::<bool>() { (u, v) } else { (v, u) };
        edges.push(TemporalEdge::new(src, dst, i as f64));
        closures.push(closed);
        adj[u as usize].push(v);
        adj[v as usize].push(u);
        linked.insert(key(u, v));
        recent.push_back((u, v));
        if recent.len() > p.window.max(1) {
            recent.pop_front();
        }
    }
    Ok(SynthStream {
        dataset: Dataset::from_edges(edges, n)?,
        closures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarbellParams {
    pub events: usize,
    /// Nodes per community; `0` picks `max(5, events / 20)`.
    pub side: usize,
    pub seed: u64,
}

impl Default for BarbellParams {
    fn default() -> Self {
        Self {
            events: 1000,
            side: 0,
            seed: 0,
        }
    }
}

/// Two communities that mirror each other: node `i` of the first side and
/// node `i + side` of the second receive the same history, one step apart.
/// Any node thus has a structural twin that only joint neighborhoods can
/// tell apart.
pub fn barbell(p: &BarbellParams) -> Result<SynthStream> {
    check_size(p.events)?;
    let side = if p.side == 0 { (p.events / 20).max(5) } else { p.side };
    if side < 2 {
        return Err(Error::Config("barbell communities need at least 2 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut edges = Vec::with_capacity(p.events);
    let mut i = 0;
    while edges.len() < p.events {
        let x = rng.gen_range(1..=side as NodeId);
        let mut y = rng.gen_range(1..=side as NodeId - 1);
        if y >= x {
            y += 1;
        }
        edges.push(TemporalEdge::new(x, y, i as f64));
        if edges.len() < p.events {
            let s = side as NodeId;
            edges.push(TemporalEdge::new(x + s, y + s, (i + 1) as f64));
        }
        i += 2;
    }
    let closures = vec![false; edges.len()];
    Ok(SynthStream {
        dataset: Dataset::from_edges(edges, 2 * side)?,
        closures,
    })
}
